"""Command-line front end.

Verbs
-----
run           run a scenario file and write a CSV
preset        run a named preset and write a CSV
eval          evaluate one closed-form formula
list-presets  print the preset registry
selftest      check fast numerical invariants

Exit codes: 0 success, 1 self-test failure or I/O error, 2 invalid
configuration or unknown name, 3 numerical failure during a run.
Diagnostics go to stderr as ``key=value`` pairs.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time

import numpy as np

from . import __version__
from ._validation import ConfigError, IllConditionedError
from .analysis import evaluate, formula_ids, formula_parameters
from .experiments import (
    ScenarioConfig,
    apply_overrides,
    default_workers,
    figure_preset,
    load_config,
    preset_names,
    run_scenario,
    write_results,
)

__all__ = ["main", "parse_eval_params", "build_parser"]

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

# short parameter names accepted by ``eval``
PARAM_ALIASES = {
    "m": "bs_elements",
    "p": "user_elements",
    "n": "n_users",
    "k": "k_factor",
    "υ": "k_factor",
    "upsilon": "k_factor",
    "ς": "k_factor",
    "varsigma": "k_factor",
    "loss": "loss_coeff",
    "xi": "loss_coeff",
    "ξ": "loss_coeff",
    "δ2": "mse",
    "delta2": "mse",
}


def _diag(**fields) -> None:
    parts = []
    for key, value in fields.items():
        text = str(value)
        if not text or any(c.isspace() or c in '"=' for c in text):
            text = json.dumps(text, ensure_ascii=False)
        parts.append(f"{key}={text}")
    print(" ".join(parts), file=sys.stderr)


def _parse_number(text: str) -> float:
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity", "∞", "+∞"):
        return math.inf
    if t in ("-inf", "-infinity", "-∞"):
        return -math.inf
    return float(t)


def parse_eval_params(pairs: list[str]) -> dict[str, object]:
    """Turn ``key=value`` tokens into formula keyword arguments.

    Values may carry a unit suffix: ``20dB`` is converted to the linear
    ratio 100 and ``3deg`` to radians. A key ending in ``_db`` (for example
    ``snr_db=20``) is converted the same way and renamed without the suffix.
    ``inf`` and ``∞`` denote infinity. Short names ``M``, ``P``, ``N``,
    ``k``/``υ`` map to ``bs_elements``, ``user_elements``, ``n_users`` and
    ``k_factor``. Non-numeric values are passed through as strings.
    """
    out: dict[str, object] = {}
    for token in pairs:
        if "=" not in token:
            raise ConfigError(f"expected key=value, got {token!r}")
        key, raw = (s.strip() for s in token.split("=", 1))
        if not key:
            raise ConfigError(f"empty parameter name in {token!r}")
        key = PARAM_ALIASES.get(key.lower(), PARAM_ALIASES.get(key, key))
        low = raw.lower()
        to_db = False
        if key.endswith("_db"):
            key, to_db = key[:-3], True
        if low.endswith("db"):
            raw, to_db = raw[:-2], True
        in_deg = low.endswith("deg")
        if in_deg:
            raw = raw[:-3]
        try:
            value: object = _parse_number(raw)
        except ValueError:
            if to_db or in_deg:
                raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
            out[key] = raw
            continue
        if to_db:
            value = 10.0 ** (value / 10.0)
        elif in_deg:
            value = math.radians(value)
        out[key] = value
    return out


def _overrides(items: list[str] | None) -> dict[str, str]:
    pairs = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--override expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        pairs[key.strip()] = value.strip()
    return pairs


def _execute(cfg: ScenarioConfig, out: str, workers: int | None) -> int:
    workers = default_workers() if workers is None else workers
    start = time.perf_counter()
    result = run_scenario(cfg, workers=workers)
    write_results(result, out)
    _diag(
        status="ok",
        scenario=cfg.name,
        points=len(result.rows),
        trials=cfg.trials,
        seed=cfg.seed,
        workers=workers,
        seconds=f"{time.perf_counter() - start:.2f}",
        out=out,
    )
    return EXIT_OK


def _with_cli_options(cfg: ScenarioConfig, args) -> ScenarioConfig:
    cfg = apply_overrides(cfg, _overrides(args.override))
    if args.seed is not None:
        cfg = apply_overrides(cfg, {"seed": str(args.seed)})
    return cfg


def cmd_run(args) -> int:
    cfg = _with_cli_options(load_config(args.config), args)
    return _execute(cfg, args.out, args.workers)


def cmd_preset(args) -> int:
    cfg = _with_cli_options(figure_preset(args.name), args)
    return _execute(cfg, args.out, args.workers)


def cmd_eval(args) -> int:
    if args.formula_id not in formula_ids():
        raise ConfigError(f"unknown formula {args.formula_id!r}")
    params = parse_eval_params(args.params)
    res = evaluate(args.formula_id, **params)
    inputs = ";".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in res.inputs_echo.items())
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow([res.formula_id, repr(res.value), inputs])
    return EXIT_OK


def cmd_list_presets(args) -> int:
    for name in preset_names():
        cfg = figure_preset(name)
        axis = ",".join(str(v) for v in cfg.points())
        print(f"{name}\tsimulation={cfg.simulation}\tsweep={cfg.sweep_axis}:{axis}\ttrials={cfg.trials}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import CHECKS, run_selftest

    start = time.perf_counter()
    failure = run_selftest()
    if failure is not None:
        name, reason = failure
        _diag(status="fail", invariant=name, reason=reason)
        return EXIT_FAILED
    _diag(status="ok", checks=len(CHECKS), seconds=f"{time.perf_counter() - start:.2f}")
    return EXIT_OK


def _epilog() -> str:
    lines = ["presets:"]
    lines += [f"  {n}" for n in preset_names()]
    lines.append("formulas:")
    lines += [f"  {f}({', '.join(formula_parameters(f))})" for f in formula_ids()]
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmwave-mimo",
        description="mmWave multi-user massive MIMO simulator and closed-form calculator.",
        epilog=_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, metavar="verb")

    def scenario_options(p):
        p.add_argument("--out", required=True, help="CSV output path")
        p.add_argument("--override", action="append", metavar="KEY=VALUE", help="replace a config field (repeatable)")
        p.add_argument("--workers", type=int, help="worker processes (default: $MMWAVE_WORKERS or CPU count)")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("--config", required=True, help="scenario file (key = value lines)")
    scenario_options(p_run)
    p_run.set_defaults(func=cmd_run)

    p_pre = sub.add_parser("preset", help="run a named preset")
    p_pre.add_argument("name", help="preset name (see list-presets)")
    scenario_options(p_pre)
    p_pre.set_defaults(func=cmd_preset)

    p_eval = sub.add_parser("eval", help="evaluate a closed-form formula")
    p_eval.add_argument("formula_id")
    p_eval.add_argument("params", nargs="*", metavar="KEY=VALUE")
    p_eval.set_defaults(func=cmd_eval)

    p_list = sub.add_parser("list-presets", help="print the preset registry")
    p_list.set_defaults(func=cmd_list_presets)

    p_self = sub.add_parser("selftest", help="check numerical invariants")
    p_self.set_defaults(func=cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        _diag(status="error", kind="config", message="--workers must be >= 1")
        return EXIT_CONFIG
    try:
        with np.errstate(over="ignore", under="ignore"):
            return args.func(args)
    except ConfigError as exc:
        _diag(status="error", kind="config", message=str(exc))
        return EXIT_CONFIG
    except (IllConditionedError, ArithmeticError, np.linalg.LinAlgError) as exc:
        _diag(status="error", kind="numerical", message=str(exc))
        return EXIT_NUMERIC
    except OSError as exc:
        _diag(status="error", kind="io", message=str(exc))
        return EXIT_FAILED


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
