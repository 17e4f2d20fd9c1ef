"""Scenario configuration, seeded sweeps and CSV output.

A :class:`ScenarioConfig` describes one experiment. :func:`run_scenario`
expands it along ``sweep_axis``, runs ``trials`` independent draws per point
and reduces them into a :class:`SweepResult`. Every draw is seeded from
``(seed, point index, trial index)``, so results do not depend on how trials
are spread over worker processes.

Scenario files are flat ``key = value`` text, one field per line, ``#``
comments, comma-separated lists, ``inf`` for infinity and ``none`` for unset
optional values. Units are carried in the key names (``_db``, ``_dbm``,
``_deg``, ``_m``, ``_hz``).
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import os
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import ConfigError, IllConditionedError, require
from .channel_model import empirical_path_loss_db, thermal_noise_dbm
from .impairments import ImpairmentModel

__all__ = [
    "ScenarioConfig",
    "SweepResult",
    "SWEEP_AXES",
    "run_scenario",
    "write_results",
    "read_results",
    "load_config",
    "parse_config",
    "dump_config",
    "apply_overrides",
    "figure_preset",
    "preset_names",
    "default_workers",
]

WORKERS_ENV = "MMWAVE_WORKERS"
SWEEP_AXES = ("snr_db", "m", "p", "n_users", "load", "k_factor", "cross_k_up", "tx_power_dbm", "array", "quant_bits")
SIMULATIONS = ("tone_aoa", "digital_precoders", "equivalent_channel_nmse", "hybrid_rate")
PRECODERS = ("slos_mrt", "slps_zf", "pac_mrt", "pac_zf")
PLACEMENTS = ("stratified", "uniform_angle", "uniform_cosine")


@dataclass(frozen=True)
class ScenarioConfig:
    """Full description of an experiment.

    Only the fields relevant to ``simulation`` are read. Angles are in
    degrees here and converted to radians at the boundary; pointing errors
    are in units of the half-power beamwidth ``1.782 / M`` (or ``/ P``).
    """

    name: str = "custom"
    simulation: str = "hybrid_rate"
    m: int = 100
    n_users: int = 10
    n_rf: int | None = None
    p: int = 1
    load: float | None = None
    k_factor: float = 2.0
    cross_k_up: float = 2.0
    cross_k_down: float = 2.0
    l_cells: int = 0
    sum_rho2: float = 0.0
    sum_zeta2: float = 0.0
    contaminating_cells: int = 6
    sweep_axis: str = "snr_db"
    axis_values: tuple = ()
    snr_db: float = 20.0
    pilot_snr_db: float = math.inf
    tone_snr_db: float = math.inf
    tx_power_dbm: float | None = None
    antenna_gain_dbi: float = 14.0
    user_distance_m: float = 100.0
    pathloss_alpha: float = 1.9
    pathloss_intercept: float = 20.0
    wavelength_m: float = 0.01
    bandwidth_hz: float = 250e6
    temperature_k: float = 300.0
    mse: float = 0.0
    precoders: tuple = PRECODERS
    slps_csi: str = "synthetic"
    estimator: str = "hybrid_eq"
    beam_source: str = "tone"
    include_fd: bool = False
    quant_bits: int | None = None
    phase_err_user_deg: float = 0.0
    phase_err_bs_deg: float = 0.0
    pointing_err_bs_hpbw: float = 0.0
    pointing_err_user_hpbw: float = 0.0
    pointing_law: str = "fixed"
    num_steps: int = 0
    user_num_steps: int = 0
    num_combined: int = 15
    num_clusters: int = 8
    scattering: str = "clusters"
    placement: str = "stratified"
    angle_redraw: str = "trial"
    trials: int = 1000
    seed: int = 0

    def __post_init__(self) -> None:
        require(self.simulation in SIMULATIONS, f"simulation must be one of {SIMULATIONS}")
        require(self.sweep_axis in SWEEP_AXES, f"sweep_axis must be one of {SWEEP_AXES}")
        require(self.m >= 1 and self.p >= 1 and self.n_users >= 1, "m, p and n_users must be >= 1")
        require(self.trials >= 1, "trials must be >= 1")
        n_rf = self.n_users if self.n_rf is None else self.n_rf
        require(self.m >= n_rf >= self.n_users, "invariant m >= n_rf >= n_users violated")
        require(self.k_factor >= 0, "k_factor must be >= 0")
        require(self.l_cells >= 0, "l_cells must be >= 0")
        require(self.sum_rho2 >= 0 and self.sum_zeta2 >= 0, "cross gains must be >= 0")
        require(self.mse >= 0, "mse must be >= 0")
        require(self.pointing_err_bs_hpbw >= 0 and self.pointing_err_user_hpbw >= 0, "pointing errors must be >= 0")
        require(set(self.precoders) <= set(PRECODERS), f"precoders must be drawn from {PRECODERS}")
        require(self.slps_csi in ("synthetic", "tone"), "slps_csi must be 'synthetic' or 'tone'")
        require(self.beam_source in ("tone", "perfect"), "beam_source must be 'tone' or 'perfect'")
        require(self.angle_redraw in ("trial", "scenario"), "angle_redraw must be 'trial' or 'scenario'")
        require(self.placement in PLACEMENTS, f"placement must be one of {PLACEMENTS}")
        require(0 <= self.seed < 2**64, "seed must be a 64-bit unsigned integer")
        require(self.load is None or self.load > 0, "load must be > 0")

    # derived quantities -------------------------------------------------

    @property
    def effective_snr_db(self) -> float:
        """Downlink SNR, from the link budget when a transmit power is set."""
        if self.tx_power_dbm is None:
            return self.snr_db
        pl = empirical_path_loss_db(self.user_distance_m, self.pathloss_alpha, self.pathloss_intercept, self.wavelength_m)
        noise = thermal_noise_dbm(self.bandwidth_hz, self.temperature_k)
        return self.tx_power_dbm + self.antenna_gain_dbi - pl - noise

    @property
    def has_impairments(self) -> bool:
        return bool(
            self.quant_bits
            or self.phase_err_bs_deg
            or self.phase_err_user_deg
            or self.pointing_err_bs_hpbw
            or self.pointing_err_user_hpbw
        )

    def impairment_model(self) -> ImpairmentModel:
        return ImpairmentModel(
            quant_bits=self.quant_bits,
            max_phase_err_user_rad=math.radians(self.phase_err_user_deg),
            max_phase_err_bs_rad=math.radians(self.phase_err_bs_deg),
            pointing_err_bs=self.pointing_err_bs_hpbw * 1.782 / self.m,
            pointing_err_user=self.pointing_err_user_hpbw * 1.782 / self.p,
            pointing_law=self.pointing_law,
            bs_elements=self.m,
            user_elements=self.p,
        )

    def at(self, axis_value) -> "ScenarioConfig":
        """The config of one sweep point."""
        axis = self.sweep_axis
        if axis == "array":
            m, p = _parse_array(axis_value)
            cfg = dataclasses.replace(self, m=m, p=p)
        elif axis == "load":
            cfg = dataclasses.replace(self, load=float(axis_value))
        else:
            typ = _field_types()[axis]
            cfg = dataclasses.replace(self, **{axis: _coerce(typ, axis_value, axis)})
        if cfg.load is not None:
            cfg = dataclasses.replace(cfg, n_users=max(1, int(round(cfg.load * cfg.m))), n_rf=None)
        return cfg

    def points(self) -> list:
        return list(self.axis_values) if self.axis_values else [getattr(self, self.sweep_axis, None)]


def _parse_array(value) -> tuple[int, int]:
    if isinstance(value, (tuple, list)):
        return int(value[0]), int(value[1])
    parts = str(value).lower().split("x")
    if len(parts) != 2:
        raise ConfigError(f"array sweep values look like '100x8', got {value!r}")
    return int(parts[0]), int(parts[1])


@dataclass
class SweepResult:
    """Rows of a sweep, one per axis value, with a fixed column order."""

    axis_name: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def column(self, name: str) -> list:
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]

    def as_dicts(self) -> list[dict]:
        return [dict(zip(self.columns, row)) for row in self.rows]


# ---------------------------------------------------------------- config files


def _field_types() -> dict[str, typing.Any]:
    return typing.get_type_hints(ScenarioConfig)


def _coerce_scalar(text: str, base, key: str):
    t = text.strip()
    if base is bool:
        if t.lower() in ("1", "true", "yes", "on"):
            return True
        if t.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if base is int:
        try:
            f = float(t)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
        if not f.is_integer():
            raise ConfigError(f"{key}: expected an integer, got {text!r}")
        return int(t) if t.lstrip("+-").isdigit() else int(f)
    if base is float:
        low = t.lower()
        if low in ("inf", "+inf", "infinity", "∞"):
            return math.inf
        if low in ("-inf", "-infinity", "-∞"):
            return -math.inf
        try:
            return float(t)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    return t


def _coerce(typ, value, key: str):
    if not isinstance(value, str):
        return value
    origin = typing.get_origin(typ)
    args = typing.get_args(typ)
    if origin in (typing.Union, getattr(__import__("types"), "UnionType", None)):
        if value.strip().lower() in ("none", "null", ""):
            return None
        base = next(a for a in args if a is not type(None))
        return _coerce(base, value, key)
    if typ is tuple or origin is tuple:
        items = [v.strip() for v in value.split(",") if v.strip()]
        if key == "axis_values":
            return tuple(items)
        return tuple(items)
    return _coerce_scalar(value, typ, key)


def parse_config(text: str) -> ScenarioConfig:
    """Parse the flat ``key = value`` scenario format."""
    return apply_overrides(ScenarioConfig(), _parse_pairs(text.splitlines(), "config"))


def _parse_pairs(lines, origin: str) -> dict[str, str]:
    pairs = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        pairs[key] = value
    return pairs


def apply_overrides(base: ScenarioConfig, overrides: dict[str, str]) -> ScenarioConfig:
    """Return ``base`` with string-valued fields replaced and re-validated.

    Besides plain field names, ``<axis>_sweep`` (for example
    ``snr_db_sweep = 0,10,20``) sets ``sweep_axis`` and ``axis_values`` at once.
    """
    types = _field_types()
    changes = {}
    for key, value in overrides.items():
        # "<axis>_sweep = v1,v2" is shorthand for choosing the axis and its values
        if key.endswith("_sweep") and key[: -len("_sweep")] in SWEEP_AXES:
            changes["sweep_axis"] = key[: -len("_sweep")]
            key = "axis_values"
        if key not in types:
            raise ConfigError(f"unknown config field {key!r}")
        changes[key] = _coerce(types[key], value, key)
    cfg = dataclasses.replace(base, **changes)
    if "axis_values" in changes:
        cfg = dataclasses.replace(cfg, axis_values=_typed_axis(cfg.sweep_axis, changes["axis_values"]))
    return cfg


def _typed_axis(axis: str, values) -> tuple:
    if axis == "array":
        return tuple(str(v) for v in values)
    if axis == "load":
        return tuple(float(v) for v in values)
    typ = _field_types()[axis]
    return tuple(_coerce(typ, str(v), axis) for v in values)


def load_config(path: str | os.PathLike) -> ScenarioConfig:
    """Read a scenario file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def dump_config(cfg: ScenarioConfig) -> str:
    """Serialize a config to the scenario file format."""
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(_fmt(x) for x in v)
        elif v is None:
            v = "none"
        else:
            v = _fmt(v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- execution


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        require(n >= 1, f"{WORKERS_ENV} must be >= 1")
        return n
    return os.cpu_count() or 1


def _trial_seed(seed: int, point: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, point, trial])


def _scenario_angles(cfg: ScenarioConfig, point: int):
    if cfg.angle_redraw != "scenario":
        return None
    from .channel_model import draw_user_angles
    from .simulations import _bs_grid

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, point, 2**32 - 1]))
    if cfg.simulation in ("tone_aoa", "digital_precoders"):
        grid = cfg.num_steps or 360
    else:
        grid = _bs_grid(cfg)
    if cfg.simulation == "tone_aoa":
        from .array_geometry import search_grid

        return search_grid(grid)[[rng.integers(1, grid)]]
    return draw_user_angles(cfg.n_users, cfg.m, rng, grid, cfg.placement)


def _run_chunk(args):
    cfg, point, start, stop = args
    from .simulations import KERNELS

    kernel = KERNELS[cfg.simulation]
    angles = _scenario_angles(cfg, point)
    out = []
    for t in range(start, stop):
        rng = np.random.default_rng(_trial_seed(cfg.seed, point, t))
        out.append(kernel(cfg, rng, angles))
    return out


def _chunks(trials: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(trials / (4 * workers)))
    return [(s, min(trials, s + size)) for s in range(0, trials, size)]


def run_scenario(config: ScenarioConfig, workers: int | None = None) -> SweepResult:
    """Run every sweep point and reduce the trials.

    Parameters
    ----------
    config : ScenarioConfig
    workers : int, optional
        Worker processes; defaults to ``$MMWAVE_WORKERS`` or the CPU count.
        The output does not depend on this value.

    Raises
    ------
    IllConditionedError
        With the offending sweep point in the message.
    """
    from .simulations import point_theory

    workers = default_workers() if workers is None else int(workers)
    require(workers >= 1, "workers must be >= 1")
    points = config.points()
    resolved = [config.at(v) for v in points]
    tasks = []
    for i, cfg in enumerate(resolved):
        for start, stop in _chunks(cfg.trials, workers):
            tasks.append((i, (cfg, i, start, stop)))

    per_point: list[list[dict]] = [[] for _ in resolved]
    try:
        if workers == 1:
            results = [_run_chunk(t) for _, t in tasks]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_chunk, [t for _, t in tasks]))
    except IllConditionedError as exc:
        raise IllConditionedError(f"{config.sweep_axis} sweep: {exc}") from exc
    for (i, _), chunk in zip(tasks, results):
        per_point[i].extend(chunk)

    columns: list[str] | None = None
    rows = []
    for value, cfg, trials in zip(points, resolved, per_point):
        stats = _reduce(trials)
        theory = point_theory(cfg)
        row_map = {config.sweep_axis: value if value is not None else getattr(cfg, config.sweep_axis), "trials": len(trials)}
        row_map.update(stats)
        row_map.update(theory)
        if columns is None:
            columns = list(row_map)
        rows.append([row_map.get(c, math.nan) for c in columns])
    if columns is None:
        columns = [config.sweep_axis, "trials"]
    return SweepResult(axis_name=config.sweep_axis, columns=columns, rows=rows)


def _reduce(trials: list[dict]) -> dict[str, float]:
    keys = list(trials[0])
    data = {k: np.array([t[k] for t in trials], dtype=float) for k in keys}
    out: dict[str, float] = {}
    ensembles = []
    for k in keys:
        v = data[k]
        if k.startswith("sig_"):
            ensembles.append(k[4:])
            continue
        if k.startswith("den_"):
            continue
        mean = math.fsum(v) / v.size
        if k.startswith("theory_"):
            out[k] = mean
            continue
        # two-pass variance in fixed trial order
        var = math.fsum((v - mean) ** 2) / (v.size - 1) if v.size > 1 else 0.0
        out[f"{k}_mean"] = mean
        out[f"{k}_std"] = math.sqrt(var)
    for kind in ensembles:
        sig = math.fsum(data[f"sig_{kind}"]) / len(trials)
        den = math.fsum(data[f"den_{kind}"]) / len(trials)
        out[f"rate_{kind}_ensemble"] = math.log2(1.0 + sig / den) if den > 0 else math.inf
    # theory columns after the empirical ones
    emp = {k: v for k, v in out.items() if not k.startswith("theory_")}
    emp.update({k: v for k, v in out.items() if k.startswith("theory_")})
    return emp


# ---------------------------------------------------------------- CSV


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return repr(f)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_results(result: SweepResult, path: str | os.PathLike) -> None:
    """Write a sweep as UTF-8 CSV with LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(result.columns)
    for row in result.rows:
        writer.writerow([_fmt(v) for v in row])
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from exc


def read_results(path: str | os.PathLike) -> SweepResult:
    """Read a CSV written by :func:`write_results` (numeric cells as floats)."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = []
        for raw in reader:
            row = []
            for cell in raw:
                try:
                    row.append(float(cell))
                except ValueError:
                    row.append(cell)
            rows.append(row)
    return SweepResult(axis_name=columns[0], columns=columns, rows=rows)


def figure_preset(name: str) -> ScenarioConfig:
    """Named scenario reproducing one of the reference studies."""
    from .presets import PRESETS

    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return PRESETS[name]()


def preset_names() -> list[str]:
    from .presets import PRESETS

    return sorted(PRESETS)
