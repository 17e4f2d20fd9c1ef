"""MRT and ZF precoders and downlink SINR accounting.

Users receive ``y_k = g_k^T beta W x + (inter-cell) + z_k``, where ``g_k``
is user ``k``'s effective channel row (its physical channel for a fully
digital BS, or its equivalent channel row for a hybrid one), ``x`` has
i.i.d. entries of energy ``E_s`` and ``beta = 1/sqrt(tr(W W^H))``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ._validation import IllConditionedError
from .aoa_estimation import BeamformerSet
from .channel_model import ChannelRealization, LinkBudget

__all__ = [
    "PrecoderKind",
    "Precoder",
    "LinkResult",
    "build_mrt_slos",
    "build_mrt",
    "build_zf",
    "effective_rows",
    "downlink_link",
    "simulate_downlink",
    "fully_digital_reference",
    "CONDITION_LIMIT",
]

CONDITION_LIMIT = 1e12


class PrecoderKind(str, enum.Enum):
    SLOS_MRT = "slos_mrt"
    SLPS_ZF = "slps_zf"
    PAC_MRT = "pac_mrt"
    PAC_ZF = "pac_zf"
    EQ_ZF = "eq_zf"
    FD_ZF = "fd_zf"


@dataclass(frozen=True)
class Precoder:
    """Precoding matrix, one column per stream, with its power normalization."""

    matrix: np.ndarray
    power_norm: float
    kind: PrecoderKind


@dataclass(frozen=True)
class LinkResult:
    """Per-user downlink powers, SINR and rate.

    ``total_power`` is the received power computed directly from the
    received signal model; it equals ``desired + intra + inter + noise``.
    """

    sinr_per_user: np.ndarray
    rate_per_user: np.ndarray
    desired_power: np.ndarray
    intra_interf: np.ndarray
    inter_interf: np.ndarray
    noise: np.ndarray
    total_power: np.ndarray


def _power_norm(w: np.ndarray) -> float:
    return float(1.0 / np.sqrt(np.real(np.trace(w @ w.conj().T))))


def build_mrt_slos(slos_matrix: np.ndarray) -> Precoder:
    """Conjugate beamforming on estimated strongest-path steering vectors."""
    w = np.conj(np.asarray(slos_matrix, dtype=complex))
    return Precoder(w, _power_norm(w), PrecoderKind.SLOS_MRT)


def build_mrt(csi: np.ndarray, kind: PrecoderKind = PrecoderKind.PAC_MRT) -> Precoder:
    """Conjugate beamforming on arbitrary channel estimates (columns per user)."""
    w = np.conj(np.asarray(csi, dtype=complex))
    return Precoder(w, _power_norm(w), PrecoderKind(kind))


def build_zf(csi: np.ndarray, kind: PrecoderKind = PrecoderKind.EQ_ZF) -> Precoder:
    """Zero-forcing precoder ``W = C^* (C^T C^*)^-1``.

    Parameters
    ----------
    csi : ndarray, shape (T, N)
        Column ``k`` is the channel estimate of user ``k`` (``T >= N``).
    kind : PrecoderKind

    Raises
    ------
    IllConditionedError
        If the Gram matrix condition number exceeds ``1e12``, which happens
        when two users share a direction.
    """
    c = np.asarray(csi, dtype=complex)
    gram = c.T @ c.conj()
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise IllConditionedError(f"ZF Gram matrix condition number {cond:.3g} exceeds {CONDITION_LIMIT:.0e}")
    w = c.conj() @ np.linalg.inv(gram)
    return Precoder(w, _power_norm(w), PrecoderKind(kind))


def effective_rows(channels: list[ChannelRealization], beams: BeamformerSet | None = None) -> np.ndarray:
    """Rows ``g_k^T`` seen by the baseband precoder.

    Without beams this is each single-antenna user's channel (first column);
    with beams it is the equivalent channel row ``(H_k q_k)^T F_RF``.
    """
    if beams is None:
        return np.stack([ch.matrix[:, 0] for ch in channels], axis=0)
    cols = np.stack([ch.matrix @ beams.user_vectors[:, k] for k, ch in enumerate(channels)], axis=1)
    return cols.T @ beams.bs_matrix


def downlink_link(
    rows: np.ndarray,
    precoder: Precoder,
    symbol_energy: float,
    noise_var: float,
    inter_cell: np.ndarray | None = None,
) -> LinkResult:
    """Power bookkeeping for one channel draw.

    Parameters
    ----------
    rows : ndarray, shape (N, T)
        Effective channel rows.
    precoder : Precoder
    symbol_energy : float
        ``E_s`` per stream.
    noise_var : float
        Receiver noise variance after combining.
    inter_cell : ndarray, shape (N,), optional
        Received inter-cell interference power per user.
    """
    g = rows @ (precoder.power_norm * precoder.matrix)
    powers = symbol_energy * np.abs(g) ** 2
    desired = np.real(np.diag(powers)).copy()
    intra = powers.sum(axis=1) - desired
    n = g.shape[0]
    inter = np.zeros(n) if inter_cell is None else np.asarray(inter_cell, dtype=float)
    noise = np.full(n, float(noise_var))
    # total from the row norms, independent of the desired/intra split
    total = symbol_energy * np.sum(np.abs(g) ** 2, axis=1) + inter + noise
    intra = np.maximum(intra, 0.0)
    denom = intra + inter + noise
    with np.errstate(divide="ignore"):
        sinr = np.where(denom > 0, desired / np.where(denom > 0, denom, 1.0), np.inf)
    return LinkResult(
        sinr_per_user=sinr,
        rate_per_user=np.log2(1.0 + sinr),
        desired_power=desired,
        intra_interf=intra,
        inter_interf=inter,
        noise=noise,
        total_power=total,
    )


def simulate_downlink(
    channels: list[ChannelRealization],
    precoder: Precoder,
    link: LinkBudget,
    beams: BeamformerSet | None = None,
    inter_cell: np.ndarray | None = None,
) -> LinkResult:
    """Downlink SINR of one draw for a digital (``beams=None``) or hybrid BS.

    Impairments enter through the beams passed in; inter-cell interference
    through a precomputed per-user power.
    """
    return downlink_link(effective_rows(channels, beams), precoder, link.symbol_energy, link.noise_var_user, inter_cell)


def fully_digital_reference(channels: list[ChannelRealization], link: LinkBudget) -> LinkResult:
    """Fully digital ZF benchmark with perfect strongest-path CSI.

    The BS zero-forces the strongest-path steering matrix and each user
    adds a receive array gain ``P``, so ``SINR = P E_s / (tr(W W^H) sigma^2)``.
    """
    h_fd = np.stack([ch.bs_steering for ch in channels], axis=1)
    pre = build_zf(h_fd, PrecoderKind.FD_ZF)
    p = channels[0].user_elements
    n = len(channels)
    desired = np.full(n, p * pre.power_norm**2 * link.symbol_energy)
    noise = np.full(n, link.noise_var_user)
    sinr = desired / noise
    zeros = np.zeros(n)
    return LinkResult(
        sinr_per_user=sinr,
        rate_per_user=np.log2(1.0 + sinr),
        desired_power=desired,
        intra_interf=zeros,
        inter_interf=zeros,
        noise=noise,
        total_power=desired + noise,
    )
