"""Per-trial Monte-Carlo kernels.

Each kernel takes a fully resolved :class:`~mmwave_mimo.experiments.ScenarioConfig`
(one sweep point) and a generator, runs one independent draw and returns a
flat ``{metric: float}`` mapping. Key prefixes tell the aggregator how to
reduce them:

* ``sig_<kind>`` / ``den_<kind>``: signal and interference-plus-noise powers,
  reduced to an ensemble rate ``log2(1 + E[sig] / E[den])``,
* ``theory_<name>``: closed forms that depend on the random geometry,
  reduced by their mean only,
* anything else: reduced to mean and standard deviation.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Callable

import numpy as np

from . import analysis
from ._validation import ConfigError, complex_normal
from .aoa_estimation import AoaSearchConfig, BeamformerSet, detect_aoa_digital, estimate_bs_beams, estimate_user_beams, perfect_beams
from .array_geometry import ArrayGeometry, detection_matrix, min_search_steps, search_grid, steering_matrix
from .channel_model import CellTopology, RicianChannelSpec, draw_channel, draw_cross_cell_channels, draw_user_angles
from .impairments import apply_beamforming_errors, apply_phase_errors, quantize_beams, quantize_weights
from .pilot_estimation import (
    digital_pilot_observation,
    estimate_equivalent_channel,
    equivalent_channel_true,
    ls_estimate_digital,
    make_pilot_book,
    uplink_contamination,
)
from .precoding import LinkResult, PrecoderKind, build_mrt, build_mrt_slos, build_zf, downlink_link, effective_rows, fully_digital_reference

if TYPE_CHECKING:  # pragma: no cover
    from .experiments import ScenarioConfig

__all__ = ["KERNELS", "point_theory"]

Metrics = dict[str, float]


def _db(x: float) -> float:
    return 10.0 ** (x / 10.0)


def _noise_from_snr_db(snr_db: float) -> float:
    return 0.0 if np.isposinf(snr_db) else 10.0 ** (-snr_db / 10.0)


def _record(out: Metrics, kind: str, res: LinkResult) -> None:
    out[f"rate_{kind}"] = float(np.mean(res.rate_per_user))
    out[f"sig_{kind}"] = float(np.mean(res.desired_power))
    out[f"den_{kind}"] = float(np.mean(res.intra_interf + res.inter_interf + res.noise))


def _bs_grid(cfg: "ScenarioConfig") -> int:
    return cfg.num_steps if cfg.num_steps else min_search_steps(cfg.m)


def _user_grid(cfg: "ScenarioConfig") -> int:
    return cfg.user_num_steps if cfg.user_num_steps else min_search_steps(max(cfg.p, 2))


def _draw_users(cfg: "ScenarioConfig", rng, bs_grid: int, k_factor: float, angles=None):
    theta = draw_user_angles(cfg.n_users, cfg.m, rng, bs_grid, cfg.placement) if angles is None else angles
    if cfg.p > 1:
        ug = _user_grid(cfg)
        phi = search_grid(ug)[rng.integers(0, ug, cfg.n_users)]
    else:
        phi = np.full(cfg.n_users, np.pi / 2)
    return [
        draw_channel(
            RicianChannelSpec(
                k_factor=k_factor,
                bs_elements=cfg.m,
                user_elements=cfg.p,
                strongest_bs_angle=float(t),
                strongest_user_angle=float(f),
                num_clusters=cfg.num_clusters,
                scattering=cfg.scattering,
            ),
            rng,
        )
        for t, f in zip(theta, phi)
    ]


# ---------------------------------------------------------------- fully digital, tone search


def tone_aoa(cfg: "ScenarioConfig", rng, angles=None) -> Metrics:
    """One user, one tone: detection success, reconstruction MSEs and K estimate."""
    j = cfg.num_steps or 360
    grid = search_grid(j)
    theta = grid[rng.integers(1, j)] if angles is None else angles[0]
    ch = draw_channel(
        RicianChannelSpec(
            k_factor=cfg.k_factor,
            bs_elements=cfg.m,
            strongest_bs_angle=float(theta),
            num_clusters=cfg.num_clusters,
            scattering=cfg.scattering,
        ),
        rng,
    )
    h = ch.matrix[:, 0]
    r = h + complex_normal(rng, h.shape, _noise_from_snr_db(cfg.snr_db))
    search = AoaSearchConfig(num_steps=j, num_combined=cfg.num_combined)
    geo = ArrayGeometry(cfg.m)
    est = detect_aoa_digital(r, search, geo, "verbatim")
    scaled = detect_aoa_digital(r, search, geo, "scaled")
    err = abs(est.angle_rad - theta) / theta
    return {
        "success": float(err < 1e-3),
        "mse_slos": float(np.mean(np.abs(h - est.slos_vector) ** 2)),
        "mse_slps": float(np.mean(np.abs(h - est.combined_channel) ** 2)),
        "mse_slps_scaled": float(np.mean(np.abs(h - scaled.combined_channel) ** 2)),
        "inv_k_factor_hat": 0.0 if np.isinf(est.k_factor_hat) else 1.0 / est.k_factor_hat,
    }


def _slos_matrix(h: np.ndarray, j: int, noise_var: float, rng) -> np.ndarray:
    m = h.shape[0]
    r = h if noise_var == 0 else h + complex_normal(rng, h.shape, noise_var)
    idx = np.argmax(np.abs(detection_matrix(m, j).T @ r), axis=0)
    return steering_matrix(m, search_grid(j)[idx])


def digital_precoders(cfg: "ScenarioConfig", rng, angles=None) -> Metrics:
    """Fully digital BS with tone-based and pilot-based CSI, MRT and ZF.

    Pilot-based (PAC) estimates are contaminated by ``T = cfg.contaminating_cells``
    neighbours with i.i.d. cross channels, each of power ``mse / T``.
    Tone-based ZF uses either the reconstructed channel or, by default, the
    true channel plus i.i.d. error of variance ``mse`` (matched-error study).
    """
    j = cfg.num_steps or 360
    chans = _draw_users(cfg, rng, j, cfg.k_factor, angles)
    h = np.stack([c.matrix[:, 0] for c in chans], axis=1)
    m, n = h.shape
    es = _db(cfg.snr_db)
    kinds = cfg.precoders
    out: Metrics = {}
    slos_true = np.stack([c.bs_steering for c in chans], axis=1)

    slos = _slos_matrix(h, j, _noise_from_snr_db(cfg.tone_snr_db), rng)
    t = max(cfg.contaminating_cells, 1)
    rho2 = cfg.mse / t
    contamination = sum(np.sqrt(rho2) * complex_normal(rng, (m, n)) for _ in range(t))
    book = make_pilot_book(n)
    y = digital_pilot_observation(h, book, _noise_from_snr_db(cfg.pilot_snr_db), rng, contamination)
    h_pac = ls_estimate_digital(y, book)

    precoders = {}
    if "slos_mrt" in kinds:
        precoders["slos_mrt"] = build_mrt_slos(slos)
    if "pac_mrt" in kinds:
        precoders["pac_mrt"] = build_mrt(h_pac, PrecoderKind.PAC_MRT)
    if "slps_zf" in kinds:
        if cfg.slps_csi == "tone":
            search = AoaSearchConfig(num_steps=j, num_combined=cfg.num_combined)
            geo = ArrayGeometry(m)
            noise = _noise_from_snr_db(cfg.tone_snr_db)
            h_slps = np.stack(
                [detect_aoa_digital(h[:, k] + complex_normal(rng, m, noise), search, geo).combined_channel for k in range(n)],
                axis=1,
            )
        else:
            h_slps = h + complex_normal(rng, (m, n), cfg.mse)
        precoders["slps_zf"] = build_zf(h_slps, PrecoderKind.SLPS_ZF)
    if "pac_zf" in kinds:
        precoders["pac_zf"] = build_zf(h_pac, PrecoderKind.PAC_ZF)

    rows = h.T
    for kind, pre in precoders.items():
        variants = [(kind, pre)]
        if cfg.quant_bits:
            w_q = quantize_weights(pre.matrix, cfg.quant_bits)
            variants.append((f"{kind}_quantized", type(pre)(w_q, float(1 / np.sqrt(np.sum(np.abs(w_q) ** 2))), pre.kind)))
        for name, p in variants:
            inter = None
            if kind.startswith("pac"):
                # each pilot-sharing neighbour leaks the stream of user k through an independent cross channel
                col_pow = p.power_norm**2 * np.sum(np.abs(p.matrix) ** 2, axis=0)
                inter = es * rho2 * np.sum(np.abs(complex_normal(rng, (t, n))) ** 2 * col_pow[None, :], axis=0)
            _record(out, name, downlink_link(rows, p, es, 1.0, inter))
            if name.endswith("_quantized"):
                out[f"loss_{kind}"] = out[f"rate_{kind}"] - out[f"rate_{name}"]

    snr = es
    if "slos_mrt" in kinds:
        out["theory_slos_mrt"] = float(np.mean(analysis.rate_slos_mrt_approx(slos_true, cfg.k_factor, snr)))
    if "pac_mrt" in kinds:
        out["theory_pac_mrt"] = float(np.mean(analysis.rate_pac_mrt_approx(slos_true, cfg.k_factor, cfg.mse, snr)))
    if "slps_zf" in kinds or "pac_zf" in kinds:
        gs = analysis.gram_summary(h)
        if "slps_zf" in kinds:
            out["theory_slps_zf"] = float(np.mean(analysis.rate_zf_imperfect_csi(gs, cfg.mse, "slps", m, snr=snr)))
        if "pac_zf" in kinds:
            out["theory_pac_zf"] = float(np.mean(analysis.rate_zf_imperfect_csi(gs, cfg.mse, "pac", m, snr=snr)))
    if cfg.quant_bits and "slos_mrt" in kinds:
        part1 = analysis.los_interference(slos_true)
        a = np.pi / 2**cfg.quant_bits
        ideal = 1.0 / (part1 + n / (m * cfg.k_factor))
        out["theory_slos_mrt_quantized"] = float(np.mean(np.log2(1 + ideal * np.sinc(a / np.pi) ** 2)))
    return out


# ---------------------------------------------------------------- hybrid


def _neighbour_users(cfg, rng, bs_grid):
    return _draw_users(cfg, rng, bs_grid, cfg.k_factor)


def _topology(cfg) -> CellTopology:
    return CellTopology.uniform(cfg.l_cells, cfg.n_users, cfg.sum_rho2, cfg.sum_zeta2, cfg.cross_k_up, cfg.cross_k_down)


def _contamination(cfg, rng, topo):
    if cfg.l_cells == 0 or cfg.sum_rho2 == 0:
        return None
    cross = draw_cross_cell_channels(topo, cfg.m, cfg.p, rng, "uplink", "rician", cfg.num_clusters)
    vectors = []
    for _ in range(cfg.l_cells):
        phi = np.arccos(rng.uniform(-1.0, 1.0, cfg.n_users))
        vectors.append(steering_matrix(cfg.p, phi) / np.sqrt(cfg.p))
    return uplink_contamination(cross, vectors)


def _beams(cfg, chans, rng, bs_grid) -> BeamformerSet:
    if cfg.beam_source == "perfect":
        return perfect_beams(chans)
    noise = _noise_from_snr_db(cfg.tone_snr_db)
    bs = estimate_bs_beams(chans, AoaSearchConfig(num_steps=bs_grid, num_combined=1), noise, rng)
    return estimate_user_beams(chans, bs, AoaSearchConfig(num_steps=_user_grid(cfg), num_combined=1), noise, rng)


def _impair(cfg, beams, rng) -> BeamformerSet:
    model = cfg.impairment_model()
    out = apply_beamforming_errors(beams, model, rng)
    if cfg.quant_bits:
        out = quantize_beams(out, cfg.quant_bits)
    return apply_phase_errors(out, model, rng)


def _pilot_noise(cfg) -> float:
    if cfg.mse > 0:
        return cfg.mse
    return _noise_from_snr_db(cfg.pilot_snr_db)


def _intercell_power(cfg, rng, beams, es, bs_grid, topo) -> np.ndarray:
    """Received power at each desired user from the neighbour BSs' downlink."""
    down = draw_cross_cell_channels(topo, cfg.m, cfg.p, rng, "downlink", "rician", cfg.num_clusters)
    power = np.zeros(cfg.n_users)
    for l in range(cfg.l_cells):
        nb_chans = _neighbour_users(cfg, rng, bs_grid)
        nb_beams = perfect_beams(nb_chans)
        h_eq = equivalent_channel_true(nb_chans, nb_beams)
        h_hat = h_eq + complex_normal(rng, h_eq.shape, cfg.sum_rho2)
        pre = build_zf(h_hat.T, PrecoderKind.EQ_ZF)
        tx = nb_beams.bs_matrix @ (pre.power_norm * pre.matrix)
        for k in range(cfg.n_users):
            r = down[l][k].matrix @ beams.user_vectors[:, k]
            power[k] += es * float(np.sum(np.abs(r @ tx) ** 2))
    return power


def hybrid_rate(cfg: "ScenarioConfig", rng, angles=None) -> Metrics:
    """Hybrid link: beam search, equivalent-channel estimation and ZF.

    Optional pieces, driven by the config: hardware impairments (reported as
    a second, paired rate), multi-cell pilot contamination and neighbour
    downlink interference, and the fully digital benchmark.
    """
    bs_grid = _bs_grid(cfg)
    chans = _draw_users(cfg, rng, bs_grid, cfg.k_factor, angles)
    es = _db(cfg.effective_snr_db)
    beams = _beams(cfg, chans, rng, bs_grid)
    book = make_pilot_book(cfg.n_users)
    noise = _pilot_noise(cfg)
    topo = _topology(cfg)
    contamination = _contamination(cfg, rng, topo)
    inter = None
    if cfg.l_cells > 0 and cfg.sum_zeta2 > 0:
        inter = _intercell_power(cfg, rng, beams, es, bs_grid, topo)

    out: Metrics = {}
    sets = [("eq_zf", beams)]
    if cfg.has_impairments:
        sets.append(("eq_zf_impaired", _impair(cfg, beams, rng)))
    for name, bset in sets:
        est = estimate_equivalent_channel(chans, bset, book, noise, rng, contamination)
        pre = build_zf(est.matrix_hat.T, PrecoderKind.EQ_ZF)
        res = downlink_link(effective_rows(chans, bset), pre, es, 1.0, inter)
        _record(out, name, res)
        out[f"nmse_{name}"] = est.nmse
        if cfg.mse > 0 or cfg.l_cells > 0:
            err_var = cfg.mse if cfg.mse > 0 else cfg.sum_rho2 + noise
            gs = analysis.gram_summary(est.matrix_true.T)
            out[f"theory_{name}_imperfect_csi"] = float(
                np.mean(analysis.rate_zf_imperfect_csi(gs, err_var, "hybrid", snr=es))
            )
    if cfg.has_impairments:
        out["gap_impairment"] = out["rate_eq_zf"] - out["rate_eq_zf_impaired"]
    if cfg.include_fd:
        fd = fully_digital_reference(chans, _unit_link(es))
        _record(out, "fd_zf", fd)
        out["gap_fd_hybrid"] = out["rate_fd_zf"] - out["rate_eq_zf"]
    out["theory_hybrid_rate_bound"] = analysis.rate_hybrid_upper(beams.bs_matrix, cfg.k_factor, cfg.m, cfg.n_users, cfg.p, es)
    return out


def _unit_link(es):
    from .channel_model import LinkBudget

    return LinkBudget(symbol_energy=es, noise_var_user=1.0)


def equivalent_channel_nmse(cfg: "ScenarioConfig", rng, angles=None) -> Metrics:
    """Equivalent-channel NMSE of the hybrid BS next to digital LS on the same pilots."""
    bs_grid = _bs_grid(cfg)
    chans = _draw_users(cfg, rng, bs_grid, cfg.k_factor, angles)
    beams = _beams(cfg, chans, rng, bs_grid)
    book = make_pilot_book(cfg.n_users)
    noise = _noise_from_snr_db(cfg.pilot_snr_db)
    topo = _topology(cfg)
    contamination = _contamination(cfg, rng, topo)
    est = estimate_equivalent_channel(chans, beams, book, noise, rng, contamination)
    cols = np.stack([c.matrix @ beams.user_vectors[:, k] for k, c in enumerate(chans)], axis=1)
    y = digital_pilot_observation(cols, book, noise, rng, contamination)
    err = ls_estimate_digital(y, book) - cols
    return {
        "nmse_hybrid": est.nmse,
        "nmse_digital": float(np.mean(np.abs(err) ** 2)),
    }


KERNELS: dict[str, Callable[..., Metrics]] = {
    "tone_aoa": tone_aoa,
    "digital_precoders": digital_precoders,
    "equivalent_channel_nmse": equivalent_channel_nmse,
    "hybrid_rate": hybrid_rate,
}


def point_theory(cfg: "ScenarioConfig") -> dict[str, float]:
    """Closed forms that depend only on the sweep point parameters."""
    sim = cfg.simulation
    out: dict[str, float] = {}
    k = cfg.k_factor
    if sim == "tone_aoa":
        out["theory_slos_mse"] = analysis.slos_mse(k)
    elif sim == "digital_precoders":
        load = cfg.n_users / cfg.m
        snr = _db(cfg.snr_db)
        out["theory_slos_mrt_large_system"] = analysis.FORMULAS["slos_mrt_large_system"](load, k, snr)
        out["theory_pac_mrt_large_system"] = analysis.FORMULAS["pac_mrt_large_system"](load, k, cfg.mse)
        out["theory_slps_zf_large_system"] = analysis.FORMULAS["slps_zf_large_system"](load, k, cfg.mse)
        if cfg.quant_bits:
            a = np.pi / 2**cfg.quant_bits
            out["theory_quantized_slos_mrt"] = float(np.log2(1 + analysis.sinr_quantized_mrt("slos", a, k, load)))
            out["theory_quantized_pac_mrt"] = float(np.log2(1 + analysis.sinr_quantized_mrt("pac", a, k, load, cfg.mse)))
            out["theory_quantization_rate_loss"] = analysis.FORMULAS["quantization_rate_loss"](load, k, cfg.quant_bits)
    elif sim == "equivalent_channel_nmse":
        pilot = _db(cfg.pilot_snr_db) if np.isfinite(cfg.pilot_snr_db) else np.inf
        out["theory_multicell_nmse"] = analysis.multicell_nmse(cfg.m, cfg.p, cfg.sum_rho2, pilot)
        out["theory_digital_nmse"] = cfg.sum_rho2 + (0.0 if np.isinf(pilot) else 1.0 / pilot)
    elif sim == "hybrid_rate":
        snr = _db(cfg.effective_snr_db)
        m, p, n = cfg.m, cfg.p, cfg.n_users
        out["theory_hybrid_rate_large_m"] = analysis.hybrid_rate_large_m(m, p, n, k, snr)
        if cfg.include_fd:
            out["theory_fd_rate_large_m"] = analysis.fd_rate_large_m(m, p, n, snr)
            out["theory_fd_hybrid_gap"] = analysis.fd_hybrid_gap(k)
        if cfg.has_impairments:
            xi_hat = cfg.impairment_model().effective_loss_coeff
            out["theory_impaired_rate"] = analysis.impaired_rate(m, p, n, k, snr, xi_hat)
            out["theory_impairment_gap"] = analysis.impairment_gap(xi_hat)
            out["theory_loss_coefficient"] = xi_hat
        if cfg.mse > 0:
            out["theory_hybrid_zf_imperfect_large_m"] = analysis.hybrid_zf_imperfect_large_m(m, p, n, k, cfg.mse)
        if cfg.l_cells > 0:
            out["theory_multicell_rate"] = analysis.rate_multicell_approx(m, p, n, k, cfg.sum_rho2, cfg.sum_zeta2, snr)
            out["theory_multicell_rate_exact_norm"] = analysis.rate_multicell_approx(
                m, p, n, k, cfg.sum_rho2, cfg.sum_zeta2, snr, normalization="exact"
            )
            pilot = _db(cfg.pilot_snr_db) if np.isfinite(cfg.pilot_snr_db) else np.inf
            out["theory_multicell_nmse"] = analysis.multicell_nmse(m, p, cfg.sum_rho2, pilot)
    else:
        raise ConfigError(f"unknown simulation {sim!r}")
    return out
