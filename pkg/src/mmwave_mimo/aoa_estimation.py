"""Tone-based angle-of-arrival search.

Each user owns one narrowband tone, so the base station observes every user
free of multi-user interference. Two variants are provided:

* a fully digital search that correlates the array snapshot against a grid
  of matched filters and rebuilds the channel from the strongest outputs,
* the first two steps of the hybrid procedure, which pick one analog beam
  per user at the base station and then one at each user.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import ConfigError, as_generator, complex_normal, require
from .array_geometry import ArrayGeometry, detection_matrix, search_grid, steering_matrix
from .channel_model import ChannelRealization

__all__ = [
    "ToneConfig",
    "AoaSearchConfig",
    "BeamformerSet",
    "SlosEstimate",
    "doppler_shift",
    "tone_capacity",
    "detect_aoa_digital",
    "estimate_bs_beams",
    "estimate_user_beams",
    "perfect_beams",
]

SPEED_OF_LIGHT = 299_792_458.0
_MAX_RELATIVE_BAND = 2e-4


def doppler_shift(speed_mps: float, carrier_hz: float) -> float:
    """Maximum Doppler shift ``v f_c / c``.

    Uses ``c = 3e8`` m/s, the usual engineering round-off, so 72 km/h at
    30 GHz gives exactly 2 kHz.
    """
    return speed_mps * carrier_hz / 3e8


@dataclass(frozen=True)
class ToneConfig:
    """Frequency plan of the uplink tones.

    Parameters
    ----------
    carrier_hz : float
        Carrier frequency ``f_c``.
    tone_band_hz : float
        Bandwidth ``BW`` reserved for tones. Must satisfy ``BW / f_c < 2e-4``
        so every tone sees the same array response.
    max_doppler_hz : float
        Largest Doppler shift ``f_d``.
    tone_width_hz : float
        Spectral width of a tone.
    guard_hz : float, optional
        Tone spacing ``B_k``; defaults to the minimum ``max(2 f_d, width)``.
    """

    carrier_hz: float
    tone_band_hz: float
    max_doppler_hz: float = 0.0
    tone_width_hz: float = 0.0
    guard_hz: float | None = None

    def __post_init__(self) -> None:
        require(self.carrier_hz > 0 and self.tone_band_hz > 0, "frequencies must be > 0")
        require(
            self.tone_band_hz / self.carrier_hz < _MAX_RELATIVE_BAND,
            f"tone band / carrier must be < {_MAX_RELATIVE_BAND}",
        )
        if self.guard_hz is not None:
            require(self.guard_hz > 2.0 * self.max_doppler_hz, "guard band must exceed twice the Doppler shift")

    @property
    def min_guard_hz(self) -> float:
        return max(2.0 * self.max_doppler_hz, self.tone_width_hz)

    @property
    def effective_guard_hz(self) -> float:
        return self.guard_hz if self.guard_hz is not None else self.min_guard_hz


def tone_capacity(config: ToneConfig) -> int:
    """Number of tones (hence users) that fit in the tone band."""
    guard = config.effective_guard_hz
    if guard <= 0:
        raise ConfigError("tone spacing is zero: set a Doppler shift, tone width or guard band")
    return int(np.floor(config.tone_band_hz / guard + 1e-12))


@dataclass(frozen=True)
class AoaSearchConfig:
    """Grid search settings.

    Parameters
    ----------
    num_steps : int
        Grid size ``J``; the grid step is ``pi / J``.
    num_combined : int
        Number ``D`` of strongest outputs kept for channel reconstruction.
    tone_snr_db : float
        Per-antenna tone SNR used when the caller does not pass a noise level.
    """

    num_steps: int = 360
    num_combined: int = 15
    tone_snr_db: float = np.inf

    def __post_init__(self) -> None:
        require(self.num_steps >= 2, "num_steps must be >= 2")
        require(1 <= self.num_combined <= self.num_steps, "num_combined must lie in [1, num_steps]")

    @property
    def noise_var(self) -> float:
        return 0.0 if np.isposinf(self.tone_snr_db) else 10.0 ** (-self.tone_snr_db / 10.0)


@dataclass(frozen=True)
class BeamformerSet:
    """Analog beams of a hybrid link.

    Attributes
    ----------
    bs_matrix : ndarray, shape (M, N)
        BS analog matrix; column ``k`` has entries of modulus ``1/sqrt(M)``.
    user_vectors : ndarray, shape (P, N)
        Column ``k`` is user ``k``'s analog vector, entries of modulus
        ``1/sqrt(P)``. The downlink gain of stream ``j`` at user ``k`` is
        ``bs_matrix[:, j] @ H_k @ user_vectors[:, k]``.
    estimated_bs_angles, estimated_user_angles : ndarray, shape (N,)
        Grid angles the beams point at.
    """

    bs_matrix: np.ndarray
    user_vectors: np.ndarray
    estimated_bs_angles: np.ndarray
    estimated_user_angles: np.ndarray

    @property
    def n_beams(self) -> int:
        return self.bs_matrix.shape[1]


@dataclass(frozen=True)
class SlosEstimate:
    """Outcome of the fully digital tone search for one user.

    Attributes
    ----------
    slos_vector : ndarray, shape (M,)
        Steering vector of the strongest grid direction.
    combined_channel : ndarray, shape (M,)
        Strongest path plus the ``D - 1`` next strongest detections.
    k_factor_hat : float
        Rician factor estimate (``inf`` when no secondary energy is seen).
    detection_outputs : ndarray, shape (J,)
        Matched-filter outputs over the grid.
    angle_index : int
        Grid index of the strongest output.
    angle_rad : float
        Grid angle of the strongest output.
    """

    slos_vector: np.ndarray
    combined_channel: np.ndarray
    k_factor_hat: float
    detection_outputs: np.ndarray
    angle_index: int
    angle_rad: float


def _ranked(outputs: np.ndarray) -> np.ndarray:
    # stable sort on -|w| keeps the lowest index first among equal magnitudes
    return np.argsort(-np.abs(outputs), kind="stable")


def detect_aoa_digital(
    received: np.ndarray,
    search: AoaSearchConfig,
    geometry: ArrayGeometry,
    reconstruction: str = "verbatim",
) -> SlosEstimate:
    """Fully digital tone search and channel reconstruction.

    Parameters
    ----------
    received : ndarray, shape (M,)
        Baseband array snapshot of one user's tone (channel plus noise).
    search : AoaSearchConfig
        Grid size and number of combined directions.
    geometry : ArrayGeometry
        BS array.
    reconstruction : {"verbatim", "scaled"}
        ``"verbatim"`` weights the strongest direction by
        ``sqrt(K/(K+1))`` and the sum of secondary directions by
        ``sqrt(1/(K+1))``. ``"scaled"`` applies ``sqrt(K/(K+1))`` to both,
        which keeps the secondary terms at their measured amplitude relative
        to the strongest one.

    Returns
    -------
    SlosEstimate
    """
    m = geometry.num_elements
    r = np.asarray(received, dtype=complex).ravel()
    if r.size != m:
        raise ConfigError(f"received snapshot has {r.size} entries, expected {m}")
    if reconstruction not in ("verbatim", "scaled"):
        raise ConfigError("reconstruction must be 'verbatim' or 'scaled'")
    gamma = detection_matrix(m, search.num_steps)
    outputs = gamma.T @ r
    order = _ranked(outputs)
    best = int(order[0])
    grid = search_grid(search.num_steps)
    steer = steering_matrix(m, grid[order[: search.num_combined]])
    slos = steer[:, 0]

    lead = outputs[best]
    if lead == 0:
        ratios = np.zeros(search.num_combined - 1, dtype=complex)
    else:
        ratios = outputs[order[1 : search.num_combined]] / lead
    inv_k = float(np.sum(np.abs(ratios) ** 2))
    k_hat = np.inf if inv_k == 0 else 1.0 / inv_k
    scatter = steer[:, 1:] @ ratios
    w_los = 1.0 if inv_k == 0 else np.sqrt(k_hat / (k_hat + 1.0))
    w_sc = np.sqrt(inv_k / (1.0 + inv_k))  # sqrt(1/(K+1)) written to stay finite as K -> inf
    if reconstruction == "verbatim":
        combined = w_los * slos + w_sc * scatter
    else:
        combined = w_los * (slos + scatter)
    return SlosEstimate(
        slos_vector=slos,
        combined_channel=combined,
        k_factor_hat=k_hat,
        detection_outputs=outputs,
        angle_index=best,
        angle_rad=float(grid[best]),
    )


def estimate_bs_beams(
    channels: list[ChannelRealization],
    search: AoaSearchConfig,
    noise_var: float | None = None,
    rng=None,
) -> BeamformerSet:
    """Pick one BS analog beam per user from its uplink tone.

    Each user sends its tone from a single omnidirectional element, so the
    BS sees the first column of the user's channel plus CN(0, noise_var)
    noise per antenna.

    Returns
    -------
    BeamformerSet
        ``user_vectors`` are placeholders (first element one) until
        :func:`estimate_user_beams` fills them.
    """
    rng = as_generator(rng)
    noise_var = search.noise_var if noise_var is None else noise_var
    m = channels[0].bs_elements
    p = channels[0].user_elements
    gamma = detection_matrix(m, search.num_steps)
    grid = search_grid(search.num_steps)
    snapshots = np.stack([ch.matrix[:, 0] for ch in channels], axis=1)
    if noise_var > 0:
        snapshots = snapshots + complex_normal(rng, snapshots.shape, noise_var)
    outputs = np.abs(gamma.T @ snapshots)
    idx = np.argmax(outputs, axis=0)  # argmax returns the first maximum
    placeholder = np.zeros((p, len(channels)), dtype=complex)
    placeholder[0, :] = 1.0
    return BeamformerSet(
        bs_matrix=gamma[:, idx],
        user_vectors=placeholder,
        estimated_bs_angles=grid[idx],
        estimated_user_angles=np.full(len(channels), np.nan),
    )


def estimate_user_beams(
    channels: list[ChannelRealization],
    bs_beams: BeamformerSet,
    search: AoaSearchConfig,
    noise_var: float | None = None,
    rng=None,
) -> BeamformerSet:
    """Pick each user's analog beam from a downlink tone sent through its BS beam.

    User ``k`` receives ``H_k^T f_k + z`` on its ``P`` elements, correlates it
    against the ``P``-element grid and keeps the strongest direction.
    """
    rng = as_generator(rng)
    noise_var = search.noise_var if noise_var is None else noise_var
    p = channels[0].user_elements
    n = len(channels)
    if p == 1:
        return BeamformerSet(
            bs_matrix=bs_beams.bs_matrix,
            user_vectors=np.ones((1, n), dtype=complex),
            estimated_bs_angles=bs_beams.estimated_bs_angles,
            estimated_user_angles=np.full(n, np.pi / 2),
        )
    grid = search_grid(search.num_steps)
    # combining with omega_i = conj(a(phi_i))/sqrt(P): omega_i^H r = a(phi_i)^T r / sqrt(P)
    combiner = steering_matrix(p, grid) / np.sqrt(p)
    rx = np.stack([ch.matrix.T @ bs_beams.bs_matrix[:, k] for k, ch in enumerate(channels)], axis=1)
    if noise_var > 0:
        rx = rx + complex_normal(rng, rx.shape, noise_var)
    idx = np.argmax(np.abs(combiner.T @ rx), axis=0)
    return BeamformerSet(
        bs_matrix=bs_beams.bs_matrix,
        user_vectors=combiner[:, idx],
        estimated_bs_angles=bs_beams.estimated_bs_angles,
        estimated_user_angles=grid[idx],
    )


def perfect_beams(channels: list[ChannelRealization]) -> BeamformerSet:
    """Beams aimed exactly at each user's strongest path (known angles)."""
    m = channels[0].bs_elements
    p = channels[0].user_elements
    theta = np.array([ch.strongest_bs_angle for ch in channels])
    phi = np.array([ch.strongest_user_angle for ch in channels])
    return BeamformerSet(
        bs_matrix=np.conj(steering_matrix(m, theta)) / np.sqrt(m),
        user_vectors=steering_matrix(p, phi) / np.sqrt(p),
        estimated_bs_angles=theta,
        estimated_user_angles=phi,
    )
