"""Orthogonal-pilot least-squares channel estimation.

Three regimes share the same pilot book:

* fully digital LS, where pilot reuse in neighbouring cells biases every
  antenna's estimate,
* hybrid estimation of the ``N x N`` equivalent channel seen through the
  analog beams of both link ends,
* the hybrid estimate under multi-cell pilot reuse, where the analog beams
  suppress most of the contamination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import ConfigError, as_generator, complex_normal
from .aoa_estimation import BeamformerSet
from .channel_model import ChannelRealization

__all__ = [
    "PilotBook",
    "EquivalentChannel",
    "EstimationReport",
    "make_pilot_book",
    "digital_pilot_observation",
    "ls_estimate_digital",
    "equivalent_channel_true",
    "uplink_contamination",
    "estimate_equivalent_channel",
    "nmse_report",
]


@dataclass(frozen=True)
class PilotBook:
    """Pilot matrix ``Psi`` with ``Psi^H Psi = E_P I``; column ``k`` belongs to user ``k``."""

    matrix: np.ndarray
    pilot_energy: float

    @property
    def n_users(self) -> int:
        return self.matrix.shape[1]


def make_pilot_book(n_users: int, pilot_energy: float = 1.0) -> PilotBook:
    """Scaled DFT pilot book for ``n_users`` users."""
    if n_users < 1:
        raise ConfigError("n_users must be >= 1")
    if pilot_energy <= 0:
        raise ConfigError("pilot_energy must be > 0")
    idx = np.arange(n_users)
    dft = np.exp(-2j * np.pi * np.outer(idx, idx) / n_users) / np.sqrt(n_users)
    return PilotBook(matrix=np.sqrt(pilot_energy) * dft, pilot_energy=float(pilot_energy))


def digital_pilot_observation(
    channel: np.ndarray,
    pilots: PilotBook,
    noise_var: float = 0.0,
    rng=None,
    contamination: np.ndarray | None = None,
) -> np.ndarray:
    """Uplink pilot block ``Y = (H + C) Psi^T + Z`` of a fully digital BS.

    Parameters
    ----------
    channel : ndarray, shape (M, N)
        Column ``k`` is user ``k``'s channel.
    contamination : ndarray, shape (M, N), optional
        Sum of the pilot-sharing users' channels, already weighted by their
        cross gains; column ``k`` shares pilot ``k``.

    Returns
    -------
    ndarray, shape (M, N)
        Pilot observations, one column per pilot symbol.
    """
    h = np.asarray(channel, dtype=complex)
    if contamination is not None:
        h = h + contamination
    y = h @ pilots.matrix.T
    if noise_var > 0:
        y = y + complex_normal(as_generator(rng), y.shape, noise_var)
    return y


def ls_estimate_digital(received: np.ndarray, pilots: PilotBook) -> np.ndarray:
    """Least-squares estimate ``Y Psi^* (Psi^T Psi^*)^-1``.

    With ``Y`` from :func:`digital_pilot_observation` the estimate equals
    ``H + C`` plus despread noise of per-entry variance ``sigma^2 / E_P``.
    """
    psi_t = pilots.matrix.T
    gram = psi_t @ psi_t.conj().T
    if np.linalg.cond(gram) > 1e12:
        raise ConfigError("pilot matrix is singular")
    # solve X gram = Y psi_t^H instead of forming the inverse
    rhs = np.asarray(received) @ psi_t.conj().T
    return np.linalg.solve(gram.T, rhs.T).T


@dataclass(frozen=True)
class EquivalentChannel:
    """Estimated and reference equivalent channels, rows indexed by user.

    Attributes
    ----------
    matrix_hat : ndarray, shape (N, N)
        Estimate; entry ``[k, j]`` is the gain from RF chain ``j`` to user ``k``.
    matrix_true : ndarray, shape (N, N)
        Noise-free, contamination-free reference.
    error : ndarray, shape (N, N)
        ``matrix_hat - matrix_true``.
    nmse : float
        ``mean(|error|^2) / (M P)``.
    """

    matrix_hat: np.ndarray
    matrix_true: np.ndarray
    error: np.ndarray
    nmse: float


@dataclass(frozen=True)
class EstimationReport:
    """Empirical NMSE against its two-term analytic prediction."""

    nmse_empirical: float
    nmse_analytic: float
    contamination_term: float
    noise_term: float


def _beamformed_columns(channels: list[ChannelRealization], user_vectors: np.ndarray) -> np.ndarray:
    return np.stack([ch.matrix @ user_vectors[:, k] for k, ch in enumerate(channels)], axis=1)


def equivalent_channel_true(channels: list[ChannelRealization], beams: BeamformerSet) -> np.ndarray:
    """Equivalent channel; entry ``[k, j] = f_j^T H_k q_k``."""
    cols = _beamformed_columns(channels, beams.user_vectors)
    return cols.T @ beams.bs_matrix


def uplink_contamination(
    cross_channels: list[list[ChannelRealization]],
    cross_user_vectors: list[np.ndarray],
) -> np.ndarray:
    """Pilot-sharing interference at the desired BS array.

    Parameters
    ----------
    cross_channels : list of list of ChannelRealization
        ``[cell][user]`` channels from neighbour users to the desired BS.
    cross_user_vectors : list of ndarray, each (P, N)
        Analog vectors the neighbour users transmit their pilots through.

    Returns
    -------
    ndarray, shape (M, N)
        Column ``k`` sums ``U_{l,k} q_{l,k}`` over cells.
    """
    total = None
    for cell, q in zip(cross_channels, cross_user_vectors):
        cols = _beamformed_columns(cell, q)
        total = cols if total is None else total + cols
    return total


def estimate_equivalent_channel(
    channels: list[ChannelRealization],
    beams: BeamformerSet,
    pilots: PilotBook,
    noise_var: float = 0.0,
    rng=None,
    contamination: np.ndarray | None = None,
    compensate_gain: bool = False,
) -> EquivalentChannel:
    """Estimate the equivalent channel from pilots sent through the analog beams.

    Every user sends its pilot column through its analog vector; the BS
    observes each RF chain output over ``N`` pilot symbols and despreads
    with ``Psi^* / E_P``.

    Parameters
    ----------
    channels : list of ChannelRealization
        Desired users' channels.
    beams : BeamformerSet
        Analog beams at both ends.
    pilots : PilotBook
        Orthogonal pilots.
    noise_var : float
        Per-antenna uplink noise variance.
    rng : seed or Generator, optional
    contamination : ndarray, shape (M, N), optional
        Output of :func:`uplink_contamination`.
    compensate_gain : bool
        Divide user ``k``'s row by ``sqrt(w_k)`` (path-loss compensation).

    Returns
    -------
    EquivalentChannel
    """
    f = beams.bs_matrix
    cols = _beamformed_columns(channels, beams.user_vectors)
    truth = cols.T @ f
    arrival = cols if contamination is None else cols + contamination
    block = arrival @ pilots.matrix.T
    if noise_var > 0:
        block = block + complex_normal(as_generator(rng), block.shape, noise_var)
    rf_out = f.T @ block
    hat = (rf_out @ pilots.matrix.conj() / pilots.pilot_energy).T
    if compensate_gain:
        scale = 1.0 / np.sqrt(np.array([ch.large_scale_gain for ch in channels]))
        hat = hat * scale[:, None]
        truth = truth * scale[:, None]
    err = hat - truth
    mp = channels[0].bs_elements * channels[0].user_elements
    return EquivalentChannel(matrix_hat=hat, matrix_true=truth, error=err, nmse=float(np.mean(np.abs(err) ** 2) / mp))


def nmse_report(
    est: EquivalentChannel,
    bs_elements: int,
    user_elements: int,
    noise_var: float = 0.0,
    pilot_energy: float = 1.0,
    sum_cross_gain: float = 0.0,
    large_scale_gain: float = 1.0,
) -> EstimationReport:
    """Compare an estimate with ``sum_rho2/(MP) + sigma^2/(w E_P M P)``."""
    mp = bs_elements * user_elements
    contamination = sum_cross_gain / mp
    noise = noise_var / (large_scale_gain * pilot_energy * mp)
    return EstimationReport(
        nmse_empirical=est.nmse,
        nmse_analytic=contamination + noise,
        contamination_term=contamination,
        noise_term=noise,
    )
