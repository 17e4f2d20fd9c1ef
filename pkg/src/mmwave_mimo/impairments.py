"""Phase-shifter and beam-pointing impairments.

Covers nearest-level phase quantization, random phase errors uniform in a
symmetric interval, and analog beams pointed off the true direction. The
resulting power loss is summarized by ``xi`` (pointing) and
``xi_hat = sinc^2(a) sinc^2(b) xi`` (pointing plus phase errors).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, optimize

from ._validation import ConfigError, as_generator, require
from .aoa_estimation import BeamformerSet
from .array_geometry import array_gain

__all__ = [
    "ImpairmentModel",
    "sinc",
    "quantize_phases",
    "quantize_weights",
    "quantize_beams",
    "max_quantization_error",
    "apply_phase_errors",
    "apply_beamforming_errors",
    "power_loss_coefficient",
    "half_power_offset",
    "three_db_phase_error",
    "quantization_keeps_half_power",
    "predicted_rate_with_impairments",
]

_POINTING_LAWS = ("fixed", "gaussian")


def sinc(x):
    """Unnormalized sinc ``sin(x)/x`` with ``sinc(0) = 1``."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def half_power_offset(num_elements: int) -> float:
    """Cosine offset at the half-power point, half of ``1.782/M``."""
    return 0.891 / num_elements


def power_loss_coefficient(num_elements: int, scale: float, law: str = "fixed") -> float:
    """Mean array-gain loss ``E[G(eps)] / M`` of a mis-pointed beam.

    Parameters
    ----------
    num_elements : int
        Array size of the mis-pointed side.
    scale : float
        Pointing error scale in the cosine domain. For ``"fixed"`` every
        beam is off by exactly ``scale``; for ``"gaussian"`` the offset is
        ``N(0, scale^2)``.
    law : {"fixed", "gaussian"}
    """
    if law not in _POINTING_LAWS:
        raise ConfigError(f"law must be one of {_POINTING_LAWS}")
    if scale == 0:
        return 1.0
    m = num_elements
    if law == "fixed":
        return float(array_gain(m, scale) / m)
    pdf = lambda e: np.exp(-0.5 * (e / scale) ** 2) / (np.sqrt(2 * np.pi) * scale)
    val, _ = integrate.quad(lambda e: array_gain(m, e) / m * pdf(e), -8 * scale, 8 * scale, limit=400, points=[0.0])
    return float(val)


@dataclass(frozen=True)
class ImpairmentModel:
    """Hardware impairment settings.

    Parameters
    ----------
    quant_bits : int, optional
        Phase-shifter resolution; ``None`` disables quantization.
    max_phase_err_user_rad, max_phase_err_bs_rad : float
        Half-widths ``a`` and ``b`` of the uniform phase errors.
    pointing_err_bs, pointing_err_user : float
        Cosine-domain pointing error scale at each end.
    pointing_law : {"fixed", "gaussian"}
        ``"fixed"`` offsets every beam by exactly the scale with a random
        sign; ``"gaussian"`` draws a normal offset with that standard deviation.
    bs_elements, user_elements : int
        Array sizes, needed to evaluate the pointing loss.
    """

    quant_bits: int | None = None
    max_phase_err_user_rad: float = 0.0
    max_phase_err_bs_rad: float = 0.0
    pointing_err_bs: float = 0.0
    pointing_err_user: float = 0.0
    pointing_law: str = "fixed"
    bs_elements: int = 1
    user_elements: int = 1

    def __post_init__(self) -> None:
        require(self.quant_bits is None or self.quant_bits >= 1, "quant_bits must be >= 1")
        require(self.max_phase_err_user_rad >= 0 and self.max_phase_err_bs_rad >= 0, "phase error bounds must be >= 0")
        require(self.pointing_err_bs >= 0 and self.pointing_err_user >= 0, "pointing errors must be >= 0")
        require(self.pointing_law in _POINTING_LAWS, f"pointing_law must be one of {_POINTING_LAWS}")

    @property
    def power_loss_coeff(self) -> float:
        """Pointing loss ``xi`` of both ends combined."""
        bs = power_loss_coefficient(self.bs_elements, self.pointing_err_bs, self.pointing_law)
        ue = power_loss_coefficient(self.user_elements, self.pointing_err_user, self.pointing_law)
        return bs * ue

    @property
    def effective_loss_coeff(self) -> float:
        """``xi_hat = sinc^2(a) sinc^2(b) xi``."""
        a, b = self.max_phase_err_user_rad, self.max_phase_err_bs_rad
        return float(sinc(a) ** 2 * sinc(b) ** 2 * self.power_loss_coeff)


def quantize_phases(phases_deg, bits: int) -> np.ndarray:
    """Map phases to the nearest of ``2^bits`` uniform levels on ``[0, 360)``.

    Wrap-around is respected, so 345 degrees maps to 0 with two bits.
    Exact midpoints round up.
    """
    if bits < 1:
        raise ConfigError("bits must be >= 1")
    levels = 2**bits
    step = 360.0 / levels
    idx = np.floor(np.mod(np.asarray(phases_deg, dtype=float), 360.0) / step + 0.5)
    return np.mod(idx, levels) * step


def max_quantization_error(bits: int) -> float:
    """Largest phase error of nearest-level quantization, ``pi / 2^bits`` radians."""
    return np.pi / 2**bits


def quantize_weights(weights: np.ndarray, bits: int) -> np.ndarray:
    """Quantize the phases of complex weights, keeping their moduli."""
    w = np.asarray(weights, dtype=complex)
    phase = quantize_phases(np.degrees(np.angle(w)), bits)
    return np.abs(w) * np.exp(1j * np.radians(phase))


def quantize_beams(beams: BeamformerSet, bits: int) -> BeamformerSet:
    """Quantize every phase shifter of a beam set."""
    return replace(
        beams,
        bs_matrix=quantize_weights(beams.bs_matrix, bits),
        user_vectors=quantize_weights(beams.user_vectors, bits),
    )


def apply_phase_errors(beams: BeamformerSet, model: ImpairmentModel, rng=None) -> BeamformerSet:
    """Multiply every phase shifter by ``exp(j eps)`` with a uniform random ``eps``.

    BS entries use ``[-b, b]`` and user entries ``[-a, a]``.
    """
    rng = as_generator(rng)
    out_bs, out_ue = beams.bs_matrix, beams.user_vectors
    b = model.max_phase_err_bs_rad
    a = model.max_phase_err_user_rad
    if b > 0:
        out_bs = out_bs * np.exp(1j * rng.uniform(-b, b, out_bs.shape))
    if a > 0:
        out_ue = out_ue * np.exp(1j * rng.uniform(-a, a, out_ue.shape))
    return replace(beams, bs_matrix=out_bs, user_vectors=out_ue)


def _pointing_offsets(rng, count: int, scale: float, law: str) -> np.ndarray:
    if law == "fixed":
        return scale * rng.choice([-1.0, 1.0], size=count)
    return rng.normal(0.0, scale, count)


def apply_beamforming_errors(beams: BeamformerSet, model: ImpairmentModel, rng=None) -> BeamformerSet:
    """Re-point each analog beam by a random cosine-domain offset.

    A BS beam aimed at direction cosine ``u`` is moved to ``u + eps`` by
    multiplying element ``n`` by ``exp(j pi n eps)``; user beams likewise
    with the conjugate ramp, matching their orientation.
    """
    rng = as_generator(rng)
    out_bs, out_ue = beams.bs_matrix, beams.user_vectors
    if model.pointing_err_bs > 0:
        m, n = out_bs.shape
        eps = _pointing_offsets(rng, n, model.pointing_err_bs, model.pointing_law)
        out_bs = out_bs * np.exp(1j * np.pi * np.arange(m)[:, None] * eps[None, :])
    if model.pointing_err_user > 0:
        p, n = out_ue.shape
        eps = _pointing_offsets(rng, n, model.pointing_err_user, model.pointing_law)
        out_ue = out_ue * np.exp(-1j * np.pi * np.arange(p)[:, None] * eps[None, :])
    return replace(beams, bs_matrix=out_bs, user_vectors=out_ue)


def three_db_phase_error() -> float:
    """Phase-error bound ``a`` with ``sinc(a) = 1/sqrt(2)`` (about 1.392 rad)."""
    return float(optimize.brentq(lambda a: sinc(a) - 2**-0.5, 1e-6, np.pi))


def quantization_keeps_half_power(max_error_rad: float, num_elements: int) -> bool:
    """Whether ``(M sinc(a))^2 >= M^2 / 2``, i.e. the mean beam keeps half its power."""
    return bool((num_elements * sinc(max_error_rad)) ** 2 >= num_elements**2 / 2.0 - 1e-9)


def predicted_rate_with_impairments(
    bs_elements: int,
    user_elements: int,
    n_users: int,
    k_factor: float,
    snr: float,
    loss_coeff: float,
) -> tuple[float, float]:
    """Large-array hybrid rate with a power-loss coefficient, and the rate gap.

    Returns
    -------
    rate : float
        ``log2(1 + [K/(K+1) M P/N loss + 1/(K+1)] snr)``.
    gap : float
        ``log2(1 / loss)``.
    """
    require(0 < loss_coeff <= 1, "loss coefficient must lie in (0, 1]")
    kk = 1.0 if math.isinf(k_factor) else k_factor / (k_factor + 1.0)
    gain = kk * bs_elements * user_elements / n_users * loss_coeff + (1.0 - kk)
    return float(np.log2(1.0 + gain * snr)), float(np.log2(1.0 / loss_coeff))
