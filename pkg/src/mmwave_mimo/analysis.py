"""Closed-form SINR, rate and NMSE approximations.

Every scalar evaluator is registered under a descriptive identifier in
:data:`FORMULAS` so that sweeps and the command line can ask for it by name.
Matrix-valued evaluators (those that need a Gram matrix or a beam matrix)
are plain functions.

Conventions: ``snr`` arguments are linear ``E_s / sigma^2``; ``mse`` is the
normalized channel-estimation error ``delta^2``; ``load`` is ``N / M``.
High-SNR forms accept ``snr=None`` for the noise-free limit.
"""

from __future__ import annotations

import inspect
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ._validation import ConfigError
from .impairments import sinc

__all__ = [
    "GramSummary",
    "ClosedFormResult",
    "FORMULAS",
    "SINR_SENTINEL",
    "evaluate",
    "formula_ids",
    "formula_parameters",
    "gram_summary",
    "kfactor_weight",
    "slos_mse",
    "los_interference",
    "rate_slos_mrt_approx",
    "rate_pac_mrt_approx",
    "rate_zf_imperfect_csi",
    "rate_hybrid_upper",
    "rate_multicell_approx",
    "sinr_quantized_mrt",
    "perturbed_inverse_approx",
    "trace_inverse_los_gram",
    "hybrid_rate_large_m",
    "fd_rate_large_m",
    "fd_rate_upper",
    "fd_hybrid_gap",
    "impaired_rate",
    "impairment_gap",
    "hybrid_zf_imperfect_large_m",
    "multicell_nmse",
    "intracell_interference_large_m",
]

SINR_SENTINEL = 1e15
"""Stand-in for an infinite SINR (error-free, noise-free link)."""


@dataclass(frozen=True)
class GramSummary:
    """Gram matrix ``K`` with the diagonal and trace of its inverse."""

    gram: np.ndarray
    inv_diag: np.ndarray
    trace_inv: float


@dataclass(frozen=True)
class ClosedFormResult:
    formula_id: str
    value: float
    inputs_echo: dict


def gram_summary(csi: np.ndarray) -> GramSummary:
    """``K = C^T C^*`` for a CSI matrix whose column ``k`` serves user ``k``."""
    c = np.asarray(csi, dtype=complex)
    gram = c.T @ c.conj()
    inv = np.linalg.inv(gram)
    diag = np.real(np.diag(inv)).copy()
    return GramSummary(gram=gram, inv_diag=diag, trace_inv=float(diag.sum()))


def kfactor_weight(k_factor: float) -> float:
    """``K / (K + 1)`` with the ``K -> inf`` limit handled."""
    return 1.0 if np.isinf(k_factor) else k_factor / (k_factor + 1.0)


def _rate(sinr):
    return np.log2(1.0 + np.minimum(sinr, SINR_SENTINEL))


def _inv(bracket):
    bracket = np.asarray(bracket, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(bracket > 0, 1.0 / np.where(bracket > 0, bracket, 1.0), SINR_SENTINEL)


def _noise(snr, scale=1.0):
    return 0.0 if snr is None or np.isinf(snr) else scale / snr


def _over_k(value, k_factor):
    # value / K, with no LOS signal (infinite term) at K = 0
    if np.isinf(k_factor):
        return 0.0
    return math.inf if k_factor == 0 else value / k_factor


# ---------------------------------------------------------------- single cell, digital


def slos_mse(k_factor: float) -> float:
    """MSE of the strongest-path-only estimate, ``2(1 - sqrt(K/(K+1)))``."""
    return 2.0 * (1.0 - math.sqrt(kfactor_weight(k_factor)))


def los_interference(slos_matrix: np.ndarray) -> np.ndarray:
    """Per-user ``(1/M^2) sum_{j != k} |h_k^H h_j|^2`` over steering columns."""
    h = np.asarray(slos_matrix, dtype=complex)
    m = h.shape[0]
    corr = np.abs(h.conj().T @ h) ** 2
    return (corr.sum(axis=1) - np.diag(corr)) / m**2


def rate_slos_mrt_approx(slos_matrix: np.ndarray, k_factor: float, snr: float | None = None) -> np.ndarray:
    """Per-user MRT rate on strongest-path estimates.

    ``log2(1 + [part1 + N/(M K) + noise]^-1)`` with ``part1`` from
    :func:`los_interference`; the noise term is ``N (K+1) / (M K snr)``.
    """
    m, n = np.shape(slos_matrix)
    part1 = los_interference(slos_matrix)
    scatter = _over_k(n / m, k_factor)
    # noise term N (K+1) / (M K snr), i.e. the scatter term plus N/(M snr)
    return _rate(_inv(part1 + scatter + _noise(snr, n / m) * (1.0 + scatter * m / n)))


def rate_pac_mrt_approx(
    slos_matrix: np.ndarray, k_factor: float, mse: float, snr: float | None = None
) -> np.ndarray:
    """Per-user MRT rate on contaminated LS estimates.

    Bracket: ``part1 + (N-1)(2K+1)/(M (K+1)^2) + N mse/M + mse/M``.
    """
    m, n = np.shape(slos_matrix)
    part1 = los_interference(slos_matrix)
    k = k_factor
    scatter = (n - 1) * (2 * k + 1) / (m * (k + 1) ** 2)
    bracket = part1 + scatter + n * mse / m + mse / m + _noise(snr, n / m)
    return _rate(_inv(bracket))


def rate_zf_imperfect_csi(
    gram: GramSummary,
    mse: float,
    variant: str = "slps",
    bs_elements: int | None = None,
    n_users: int | None = None,
    snr: float | None = None,
) -> np.ndarray:
    """Per-user high-SNR ZF rate with estimation error ``mse``.

    Parameters
    ----------
    gram : GramSummary
        Gram matrix of the true (or error-free) CSI.
    mse : float
        Estimation error ``delta^2``.
    variant : {"slps", "pac", "hybrid"}
        ``"slps"`` and ``"pac"`` are the fully digital forms, with ``pac``
        adding the ``mse/M`` inter-cell term. ``"hybrid"`` is the
        equivalent-channel form with ``N eta_kk`` in the cross term.
    bs_elements : int
        ``M``; needed by the digital variants.
    n_users : int, optional
        ``N``; defaults to the Gram size.
    snr : float, optional
        Adds ``1/(beta^2 snr)`` with ``beta^2 = 1/tr(K^-1)``.
    """
    d = float(mse)
    s = math.sqrt(1.0 + d)
    eta = gram.inv_diag
    tr = gram.trace_inv
    n = gram.gram.shape[0] if n_users is None else n_users
    if variant in ("slps", "pac"):
        if bs_elements is None:
            raise ConfigError("bs_elements is required for the digital ZF variants")
        den = 1.0 + d * tr
        bracket = (s - 1) ** 2 + s * (2 - s) * d * tr / den - 2 * s * (s - 1) * d * bs_elements * eta / den
        if variant == "pac":
            bracket = bracket + d / bs_elements
    elif variant == "hybrid":
        bracket = (s - 1) ** 2 - 2 * s * (s - 1) * d * n * eta + s * (2 - s) * d * tr
    else:
        raise ConfigError("variant must be 'slps', 'pac' or 'hybrid'")
    bracket = bracket + _noise(snr, tr)
    return _rate(_inv(np.broadcast_to(bracket, eta.shape)))


def sinr_quantized_mrt(variant: str, max_phase_error: float, k_factor: float, load: float, mse: float = 0.0) -> float:
    """Large-system MRT SINR with uniform phase errors in ``[-a, a]``.

    ``"slos"``: ``sinc^2(a) / [load^2/4 + load/K]``.
    ``"pac"``: ``sinc^2(a) / [(K/(K+1))^2 load^2/4 + load (2K+1)/(K+1)^2 + load mse]``.
    """
    g = float(sinc(max_phase_error) ** 2)
    if variant == "slos":
        den = load**2 / 4.0 + _over_k(load, k_factor)
    elif variant == "pac":
        kw = kfactor_weight(k_factor)
        scatter = 0.0 if np.isinf(k_factor) else load * (2 * k_factor + 1) / (k_factor + 1) ** 2
        den = kw**2 * load**2 / 4.0 + scatter + load * mse
    else:
        raise ConfigError("variant must be 'slos' or 'pac'")
    return float(_inv(den) * g) if den > 0 else SINR_SENTINEL


def _slps_zf_large_system_sinr(load: float, k_factor: float, mse: float) -> float:
    d = mse
    s = math.sqrt(1.0 + d)
    kw = kfactor_weight(k_factor)
    den = 1.0 + d * load
    bracket = (s - 1) ** 2 - 2 * d * s * (s - 1) * kw / den + s * (2 - s) * d * load / den
    return float(_inv(bracket))


def trace_inverse_los_gram(angles_rad, num_elements: int) -> float:
    """Exact ``tr[(H^H H)^-1]`` of the strongest-path steering matrix."""
    from .array_geometry import steering_matrix

    h = steering_matrix(num_elements, angles_rad)
    gram = h.conj().T @ h
    if np.linalg.cond(gram) > 1e12:
        raise ConfigError("steering Gram matrix is singular; users are not separated")
    return float(np.real(np.trace(np.linalg.inv(gram))))


# ---------------------------------------------------------------- hybrid single cell


def rate_hybrid_upper(
    bs_matrix: np.ndarray, k_factor: float, bs_elements: int, n_users: int, user_elements: int, snr: float
) -> float:
    """Finite-array upper bound of the hybrid ZF rate.

    ``log2{1 + [K/(K+1) M P ||F^H F||_F^2 + N^2/(K+1)] snr / N^2}``
    """
    f = np.asarray(bs_matrix, dtype=complex)
    fro = float(np.sum(np.abs(f.conj().T @ f) ** 2))
    kw = kfactor_weight(k_factor)
    n = n_users
    gain = (kw * bs_elements * user_elements * fro + n * n * (1.0 - kw)) / n**2
    return float(np.log2(1.0 + gain * snr))


def hybrid_rate_large_m(bs_elements, user_elements, n_users, k_factor, snr):
    """``log2{1 + [M P/N K/(K+1) + 1/(K+1)] snr}``."""
    kw = kfactor_weight(k_factor)
    return float(np.log2(1.0 + (bs_elements * user_elements / n_users * kw + (1.0 - kw)) * snr))


def fd_rate_large_m(bs_elements, user_elements, n_users, snr):
    """Fully digital ZF limit ``log2(1 + M P/N snr)``."""
    return float(np.log2(1.0 + bs_elements * user_elements / n_users * snr))


def fd_rate_upper(steering: np.ndarray, user_elements: int, snr: float) -> float:
    """``log2(1 + P/N^2 tr(H^H H) snr)`` for the fully digital benchmark."""
    h = np.asarray(steering, dtype=complex)
    n = h.shape[1]
    return float(np.log2(1.0 + user_elements / n**2 * np.real(np.trace(h.conj().T @ h)) * snr))


def fd_hybrid_gap(k_factor):
    """Large-array hybrid minus fully digital rate, ``log2(K/(K+1))``."""
    return float(np.log2(kfactor_weight(k_factor)))


def impaired_rate(bs_elements, user_elements, n_users, k_factor, snr, loss_coeff):
    """Large-array hybrid rate with beam power loss ``loss_coeff``."""
    kw = kfactor_weight(k_factor)
    gain = kw * bs_elements * user_elements / n_users * loss_coeff + (1.0 - kw)
    return float(np.log2(1.0 + gain * snr))


def impairment_gap(loss_coeff):
    """Rate loss ``log2(1/xi_hat)`` caused by impairments."""
    return float(np.log2(1.0 / loss_coeff))


def hybrid_zf_imperfect_large_m(bs_elements, user_elements, n_users, k_factor, mse, loss_coeff=1.0):
    """Hybrid ZF rate with estimation error, using ``K -> xi_hat M P K/(K+1) I``."""
    x = mse * n_users / (loss_coeff * bs_elements * user_elements * kfactor_weight(k_factor))
    s = math.sqrt(1.0 + mse)
    bracket = (s - 1) ** 2 - 2 * s * (s - 1) * x + s * (2 - s) * x
    return float(_rate(_inv(bracket)))


# ---------------------------------------------------------------- multi cell


def multicell_nmse(bs_elements, user_elements, sum_rho2, pilot_snr=np.inf, large_scale_gain=1.0):
    """Equivalent-channel NMSE ``sum_rho2/(MP) + 1/(w pilot_snr M P)``."""
    mp = bs_elements * user_elements
    noise = 0.0 if np.isinf(pilot_snr) else 1.0 / (large_scale_gain * pilot_snr * mp)
    return float(sum_rho2 / mp + noise)


def rate_multicell_approx(
    bs_elements,
    user_elements,
    n_users,
    k_factor,
    sum_rho2,
    sum_zeta2,
    snr,
    large_scale_gain=1.0,
    normalization="approx",
):
    """Large-array multi-cell hybrid ZF rate.

    Bracket terms: CSI-error bias ``(sqrt(1 + X/(MP)) - 1)^2``, inter-cell
    ``c sum_zeta2``, intra-cell ``(1 + X/(MP)) c X`` and noise
    ``1/(beta^2 w snr)``, with ``X = sum_rho2`` and ``c = N(K+1)/(K M P)``.

    ``normalization="approx"`` uses ``beta^2 = K/(K+1) M P/N``;
    ``"exact"`` adds the ``1/(K+1)`` scattering share so the interference-free
    limit matches :func:`hybrid_rate_large_m` exactly.
    """
    mp = bs_elements * user_elements
    kw = kfactor_weight(k_factor)
    c = n_users / (kw * mp)
    e = sum_rho2 / mp
    beta2 = kw * mp / n_users
    if normalization == "exact":
        beta2 = beta2 + (1.0 - kw)
    elif normalization != "approx":
        raise ConfigError("normalization must be 'approx' or 'exact'")
    noise = 0.0 if snr is None or np.isinf(snr) else 1.0 / (beta2 * large_scale_gain * snr)
    bracket = (math.sqrt(1.0 + e) - 1.0) ** 2 + c * sum_zeta2 + (1.0 + e) * c * sum_rho2 + noise
    return float(_rate(_inv(bracket)))


def intracell_interference_large_m(bs_elements, user_elements, n_users, k_factor, sum_rho2):
    """Intra-cell interference relative to the signal, ``(1 + X/MP) X N(K+1)/(K M P)``."""
    mp = bs_elements * user_elements
    return (1.0 + sum_rho2 / mp) * sum_rho2 * n_users / (kfactor_weight(k_factor) * mp)


# ---------------------------------------------------------------- matrix perturbation


def perturbed_inverse_approx(k_mat: np.ndarray, d_mat: np.ndarray, order: str = "full") -> np.ndarray:
    """Approximate ``(K + D)^-1`` from ``K^-1``.

    ``order="full"``: ``K^-1 - K^-1 (I + D K^-1)^-1 D K^-1``, which is exact
    by the matrix inversion lemma. ``order="first"``: ``K^-1 - K^-1 D K^-1``,
    whose error is quadratic in ``||D||``.

    Raises
    ------
    ConfigError
        If ``||D||_2 ||K^-1||_2 >= 1`` (the expansion does not converge).
    """
    k = np.asarray(k_mat, dtype=complex)
    d = np.asarray(d_mat, dtype=complex)
    k_inv = np.linalg.inv(k)
    if np.linalg.norm(d, 2) * np.linalg.norm(k_inv, 2) >= 1.0:
        raise ConfigError("perturbation too large: ||D|| ||K^-1|| must be < 1")
    correction = d @ k_inv
    if order == "first":
        return k_inv - k_inv @ correction
    if order == "full":
        eye = np.eye(k.shape[0])
        return k_inv - k_inv @ np.linalg.solve(eye + correction, correction)
    raise ConfigError("order must be 'full' or 'first'")


# ---------------------------------------------------------------- registry


def _slos_mrt_large_system(load, k_factor, snr=None):
    scatter = _over_k(load, k_factor)
    den = load**2 / 4.0 + scatter + _noise(snr, load) * (1.0 + scatter / load)
    return float(_rate(_inv(den)))


def _pac_mrt_large_system(load, k_factor, mse):
    return float(_rate(sinr_quantized_mrt("pac", 0.0, k_factor, load, mse)))


def _slps_zf_large_system(load, k_factor, mse):
    return float(_rate(_slps_zf_large_system_sinr(load, k_factor, mse)))


def _quantized_slos(load, k_factor, bits=None, max_phase_error=None):
    a = np.pi / 2**bits if max_phase_error is None else max_phase_error
    return sinr_quantized_mrt("slos", a, k_factor, load)


def _quantized_pac(load, k_factor, mse, bits=None, max_phase_error=None):
    a = np.pi / 2**bits if max_phase_error is None else max_phase_error
    return sinr_quantized_mrt("pac", a, k_factor, load, mse)


def _quantization_rate_loss(load, k_factor, bits):
    ideal = sinr_quantized_mrt("slos", 0.0, k_factor, load)
    quant = sinr_quantized_mrt("slos", np.pi / 2**bits, k_factor, load)
    return float(np.log2(1 + ideal) - np.log2(1 + quant))


def _trace_inverse_los_large(bs_elements, n_users):
    return n_users / bs_elements


def _fd_rate_large_m(bs_elements, user_elements, n_users, snr):
    return fd_rate_large_m(bs_elements, user_elements, n_users, snr)


FORMULAS: dict[str, Callable[..., float]] = {
    "slos_mse": slos_mse,
    "slos_mrt_large_system": _slos_mrt_large_system,
    "pac_mrt_large_system": _pac_mrt_large_system,
    "slps_zf_large_system": _slps_zf_large_system,
    "quantized_sinr_slos": _quantized_slos,
    "quantized_sinr_pac": _quantized_pac,
    "quantization_rate_loss": _quantization_rate_loss,
    "trace_inverse_los_large": _trace_inverse_los_large,
    "hybrid_rate_large_m": hybrid_rate_large_m,
    "fd_rate_large_m": _fd_rate_large_m,
    "fd_hybrid_gap": fd_hybrid_gap,
    "impaired_rate": impaired_rate,
    "impairment_gap": impairment_gap,
    "hybrid_zf_imperfect_large_m": hybrid_zf_imperfect_large_m,
    "multicell_nmse": multicell_nmse,
    "multicell_rate": rate_multicell_approx,
    "multicell_intracell_interference": intracell_interference_large_m,
}
"""Scalar closed forms by identifier."""


def formula_ids() -> list[str]:
    return sorted(FORMULAS)


def formula_parameters(formula_id: str) -> list[str]:
    """Parameter names accepted by a registered formula."""
    if formula_id not in FORMULAS:
        raise ConfigError(f"unknown formula {formula_id!r}")
    return list(inspect.signature(FORMULAS[formula_id]).parameters)


def evaluate(formula_id: str, **params) -> ClosedFormResult:
    """Evaluate a registered formula with keyword parameters."""
    if formula_id not in FORMULAS:
        raise ConfigError(f"unknown formula {formula_id!r}")
    fn = FORMULAS[formula_id]
    sig = inspect.signature(fn)
    unknown = set(params) - set(sig.parameters)
    if unknown:
        raise ConfigError(f"{formula_id} does not accept {sorted(unknown)}")
    try:
        bound = sig.bind(**params)
    except TypeError as exc:
        raise ConfigError(f"{formula_id}: {exc}") from None
    value = float(fn(*bound.args, **bound.kwargs))
    return ClosedFormResult(formula_id=formula_id, value=value, inputs_echo=dict(params))
