"""Rician mmWave channels, user placement, cell topology and link budget.

A channel from a user with ``P`` antennas to a base station with ``M``
antennas is the ``M x P`` matrix

    H = sqrt(w) * [sqrt(K/(K+1)) * a_BS(theta) a_UE(phi)^H + sqrt(1/(K+1)) * S]

where ``K`` is the Rician factor, ``w`` the large-scale gain and ``S`` the
unit-power scattering matrix. ``S`` is either a sum of ``N_cl`` rank-one
clusters with CN(0, 1) gains or an i.i.d. CN(0, 1) matrix. Single-antenna
users are the ``P = 1`` case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import ConfigError, as_generator, complex_normal, require
from .array_geometry import angular_separation_ok, search_grid, steering_matrix

__all__ = [
    "RicianChannelSpec",
    "ChannelRealization",
    "CellTopology",
    "LinkBudget",
    "draw_channel",
    "draw_cross_cell_channels",
    "draw_user_angles",
    "free_space_rx_power",
    "empirical_path_loss_db",
    "thermal_noise_dbm",
    "downlink_gain_from_geometry",
    "BOLTZMANN",
]

BOLTZMANN = 1.38e-23
_SCATTERING_MODELS = ("clusters", "iid")
_ANGLE_LAWS = ("angle", "cosine")


@dataclass(frozen=True)
class RicianChannelSpec:
    """Parameters of one user-to-BS channel.

    Parameters
    ----------
    k_factor : float
        Power ratio of the strongest path to the scattered paths. ``inf``
        gives a pure rank-one channel and ``0`` a pure scattering channel.
    bs_elements, user_elements : int
        Array sizes ``M`` and ``P``.
    strongest_bs_angle, strongest_user_angle : float
        Angles of the strongest path at each end, radians in ``[0, pi]``.
    num_clusters : int
        Number of scattering clusters (ignored for ``scattering="iid"``).
    large_scale_gain : float
        Linear path gain ``w`` applied to the whole matrix.
    scattering : {"clusters", "iid"}
        Scattering model.
    cluster_angle_law : {"angle", "cosine"}
        Cluster directions are uniform in angle or uniform in direction cosine.
    """

    k_factor: float
    bs_elements: int
    user_elements: int = 1
    strongest_bs_angle: float = np.pi / 2
    strongest_user_angle: float = np.pi / 2
    num_clusters: int = 8
    large_scale_gain: float = 1.0
    scattering: str = "clusters"
    cluster_angle_law: str = "angle"

    def __post_init__(self) -> None:
        require(self.k_factor >= 0 and not np.isnan(self.k_factor), "k_factor must be >= 0")
        require(self.bs_elements >= 1 and self.user_elements >= 1, "array sizes must be >= 1")
        require(self.num_clusters >= 1, "num_clusters must be >= 1")
        require(self.large_scale_gain >= 0, "large_scale_gain must be >= 0")
        require(self.scattering in _SCATTERING_MODELS, f"scattering must be one of {_SCATTERING_MODELS}")
        require(self.cluster_angle_law in _ANGLE_LAWS, f"cluster_angle_law must be one of {_ANGLE_LAWS}")
        for a in (self.strongest_bs_angle, self.strongest_user_angle):
            require(0.0 <= a <= np.pi, "strongest-path angles must lie in [0, pi]")


@dataclass(frozen=True)
class ChannelRealization:
    """One channel draw with its strongest-path/scattering decomposition.

    ``matrix == sqrt(w) * (sqrt(K/(K+1)) * strongest_part + sqrt(1/(K+1)) * scattering_part)``
    """

    matrix: np.ndarray
    strongest_part: np.ndarray
    scattering_part: np.ndarray
    cluster_gains: np.ndarray
    cluster_bs_angles: np.ndarray
    cluster_user_angles: np.ndarray
    k_factor: float
    large_scale_gain: float
    strongest_bs_angle: float
    strongest_user_angle: float

    @property
    def bs_elements(self) -> int:
        return self.matrix.shape[0]

    @property
    def user_elements(self) -> int:
        return self.matrix.shape[1]

    @property
    def bs_steering(self) -> np.ndarray:
        """BS-side steering vector of the strongest path (unit modulus)."""
        # a_UE(phi)[0] == 1, so the first column is the BS response itself
        return self.strongest_part[:, 0]


def _mixing_weights(k_factor: float) -> tuple[float, float]:
    if np.isinf(k_factor):
        return 1.0, 0.0
    return float(np.sqrt(k_factor / (k_factor + 1.0))), float(np.sqrt(1.0 / (k_factor + 1.0)))


def _draw_directions(rng: np.random.Generator, count: int, law: str) -> np.ndarray:
    if law == "cosine":
        return np.arccos(rng.uniform(-1.0, 1.0, count))
    return rng.uniform(0.0, np.pi, count)


def draw_channel(spec: RicianChannelSpec, rng=None) -> ChannelRealization:
    """Draw a Rician channel realization.

    Parameters
    ----------
    spec : RicianChannelSpec
        Channel parameters. The strongest path is deterministic.
    rng : int, SeedSequence or Generator, optional
        Randomness source for the scattering part.

    Returns
    -------
    ChannelRealization
    """
    rng = as_generator(rng)
    m, p = spec.bs_elements, spec.user_elements
    a_bs = steering_matrix(m, [spec.strongest_bs_angle])
    a_ue = steering_matrix(p, [spec.strongest_user_angle])
    strongest = a_bs @ a_ue.conj().T

    if spec.scattering == "iid":
        scattering = complex_normal(rng, (m, p))
        gains = np.zeros(0, dtype=complex)
        bs_angles = np.zeros(0)
        ue_angles = np.zeros(0)
    else:
        ncl = spec.num_clusters
        bs_angles = _draw_directions(rng, ncl, spec.cluster_angle_law)
        ue_angles = _draw_directions(rng, ncl, spec.cluster_angle_law)
        gains = complex_normal(rng, ncl)
        bs_steer = steering_matrix(m, bs_angles)
        ue_steer = steering_matrix(p, ue_angles)
        scattering = (bs_steer * gains[None, :]) @ ue_steer.conj().T / np.sqrt(ncl)

    w_los, w_sc = _mixing_weights(spec.k_factor)
    amplitude = np.sqrt(spec.large_scale_gain)
    matrix = amplitude * (w_los * strongest + w_sc * scattering)
    return ChannelRealization(
        matrix=matrix,
        strongest_part=strongest,
        scattering_part=scattering,
        cluster_gains=gains,
        cluster_bs_angles=bs_angles,
        cluster_user_angles=ue_angles,
        k_factor=float(spec.k_factor),
        large_scale_gain=float(spec.large_scale_gain),
        strongest_bs_angle=float(spec.strongest_bs_angle),
        strongest_user_angle=float(spec.strongest_user_angle),
    )


@dataclass(frozen=True)
class CellTopology:
    """Gains and Rician factors of the channels from and to neighbouring cells.

    Parameters
    ----------
    num_neighbor_cells : int
        Number ``L`` of interfering cells.
    uplink_cross_gains : ndarray, shape (L, N)
        Pilot-sharing user ``(l, k)`` gain at the desired BS, relative to the
        desired user's own large-scale gain.
    downlink_cross_gains : ndarray, shape (L, N)
        Neighbour BS ``l`` gain at desired user ``k``, relative likewise.
    cross_k_factors_up, cross_k_factors_down : float
        Rician factors of the cross-cell uplink and downlink channels.
    """

    num_neighbor_cells: int
    uplink_cross_gains: np.ndarray
    downlink_cross_gains: np.ndarray
    cross_k_factors_up: float = 2.0
    cross_k_factors_down: float = 2.0

    def __post_init__(self) -> None:
        up = np.asarray(self.uplink_cross_gains, dtype=float)
        down = np.asarray(self.downlink_cross_gains, dtype=float)
        up = up.reshape(-1, up.shape[-1]) if up.ndim else up.reshape(1, 1)
        down = down.reshape(-1, down.shape[-1]) if down.ndim else down.reshape(1, 1)
        require(self.num_neighbor_cells >= 0, "num_neighbor_cells must be >= 0")
        require(up.shape[0] == self.num_neighbor_cells, "uplink gains need one row per neighbour cell")
        require(down.shape[0] == self.num_neighbor_cells, "downlink gains need one row per neighbour cell")
        require(np.all(up >= 0) and np.all(down >= 0), "cross gains must be nonnegative")
        require(self.cross_k_factors_up >= 0 and self.cross_k_factors_down >= 0, "cross Rician factors must be >= 0")
        object.__setattr__(self, "uplink_cross_gains", up)
        object.__setattr__(self, "downlink_cross_gains", down)

    @classmethod
    def uniform(
        cls,
        num_neighbor_cells: int,
        n_users: int,
        sum_uplink_gain: float,
        sum_downlink_gain: float,
        cross_k_up: float = 2.0,
        cross_k_down: float = 2.0,
    ) -> "CellTopology":
        """Split the summed cross gains equally over the neighbour cells."""
        L = int(num_neighbor_cells)
        if L == 0:
            zeros = np.zeros((0, n_users))
            return cls(0, zeros, zeros, cross_k_up, cross_k_down)
        up = np.full((L, n_users), sum_uplink_gain / L)
        down = np.full((L, n_users), sum_downlink_gain / L)
        return cls(L, up, down, cross_k_up, cross_k_down)

    @property
    def sum_uplink_gain(self) -> np.ndarray:
        """Per-user total contamination power ``sum_l rho_{l,k}^2``."""
        return self.uplink_cross_gains.sum(axis=0)

    @property
    def sum_downlink_gain(self) -> np.ndarray:
        """Per-user total inter-cell power ``sum_l zeta_{l,k}^2``."""
        return self.downlink_cross_gains.sum(axis=0)


def draw_cross_cell_channels(
    topology: CellTopology,
    bs_elements: int,
    user_elements: int = 1,
    rng=None,
    direction: str = "uplink",
    mode: str = "rician",
    num_clusters: int = 8,
) -> list[list[ChannelRealization]]:
    """Draw one channel per (neighbour cell, user) pair.

    Parameters
    ----------
    topology : CellTopology
        Cross gains and Rician factors.
    bs_elements, user_elements : int
        Array sizes of the receiving BS and the transmitting user.
    rng : seed or Generator, optional
    direction : {"uplink", "downlink"}
        Selects which gain table and Rician factor to use.
    mode : {"rician", "iid"}
        ``"rician"`` draws strongest paths and clusters with directions
        uniform in cosine. ``"iid"`` draws zero-mean CN(0, 1) entries scaled
        by the cross gain.

    Returns
    -------
    list of list of ChannelRealization
        Indexed ``[cell][user]``.
    """
    rng = as_generator(rng)
    if direction == "uplink":
        gains, k_cross = topology.uplink_cross_gains, topology.cross_k_factors_up
    elif direction == "downlink":
        gains, k_cross = topology.downlink_cross_gains, topology.cross_k_factors_down
    else:
        raise ConfigError("direction must be 'uplink' or 'downlink'")
    if mode not in ("rician", "iid"):
        raise ConfigError("mode must be 'rician' or 'iid'")
    out: list[list[ChannelRealization]] = []
    for l in range(topology.num_neighbor_cells):
        row = []
        for k in range(gains.shape[1]):
            if mode == "iid":
                spec = RicianChannelSpec(
                    k_factor=0.0,
                    bs_elements=bs_elements,
                    user_elements=user_elements,
                    large_scale_gain=float(gains[l, k]),
                    scattering="iid",
                )
            else:
                theta, phi = _draw_directions(rng, 2, "cosine")
                spec = RicianChannelSpec(
                    k_factor=k_cross,
                    bs_elements=bs_elements,
                    user_elements=user_elements,
                    strongest_bs_angle=float(theta),
                    strongest_user_angle=float(phi),
                    num_clusters=num_clusters,
                    large_scale_gain=float(gains[l, k]),
                    cluster_angle_law="cosine",
                )
            row.append(draw_channel(spec, rng))
        out.append(row)
    return out


_PLACEMENTS = ("stratified", "uniform_angle", "uniform_cosine")


def draw_user_angles(
    n_users: int,
    num_elements: int,
    rng=None,
    grid_steps: int | None = None,
    placement: str = "stratified",
    max_tries: int = 10_000,
) -> np.ndarray:
    """Draw strongest-path angles for ``n_users`` admissible users.

    Parameters
    ----------
    n_users : int
        Number of users.
    num_elements : int
        BS array size; sets the ``4/M`` cosine separation.
    rng : seed or Generator, optional
    grid_steps : int, optional
        If given, angles are snapped to the search grid with this many points.
    placement : {"stratified", "uniform_angle", "uniform_cosine"}
        ``"stratified"`` places one user in each of ``n_users`` equal cosine
        bins. The other laws draw all users independently.
    max_tries : int
        Redraw budget before giving up.

    Returns
    -------
    ndarray, shape (n_users,)
        Angles in ``[0, pi]``, ordered by increasing direction cosine.

    Raises
    ------
    ConfigError
        If the separation rule cannot be met.
    """
    rng = as_generator(rng)
    if placement not in _PLACEMENTS:
        raise ConfigError(f"placement must be one of {_PLACEMENTS}")
    sep = 4.0 / num_elements
    require(n_users >= 1, "n_users must be >= 1")
    require((n_users - 1) * sep <= 2.0, f"{n_users} users cannot be separated by 4/M on M={num_elements}")
    grid = None if grid_steps is None else search_grid(grid_steps)

    def snap_u(u: float) -> float:
        theta = np.arccos(np.clip(u, -1.0, 1.0))
        if grid is None:
            return theta
        return grid[min(int(np.rint(theta / np.pi * grid_steps)), grid_steps - 1)]

    for _ in range(max_tries):
        if placement == "stratified":
            angles = _stratified_attempt(rng, n_users, sep, snap_u)
            if angles is None:
                continue
        elif placement == "uniform_angle":
            angles = np.array([snap_u(np.cos(t)) for t in rng.uniform(0.0, np.pi, n_users)])
        else:
            angles = np.array([snap_u(u) for u in rng.uniform(-1.0, 1.0, n_users)])
        if angular_separation_ok(angles, num_elements):
            return angles[np.argsort(np.cos(angles))]
    raise ConfigError(f"could not place {n_users} users with 4/M separation on M={num_elements}")


def _stratified_attempt(rng, n_users, sep, snap_u):
    width = 2.0 / n_users
    prev = -np.inf
    out = []
    for i in range(n_users):
        lo = max(-1.0 + i * width, prev + sep)
        hi = -1.0 + (i + 1) * width
        if lo > hi:
            return None
        for _ in range(50):
            theta = snap_u(rng.uniform(lo, hi))
            u = np.cos(theta)
            if u >= prev + sep - 1e-12:
                break
        else:
            return None
        out.append(theta)
        prev = u
    return np.array(out)


@dataclass(frozen=True)
class LinkBudget:
    """Energies and noise levels of a link, all linear and strictly positive.

    SNRs are ``symbol_energy / noise_var_user`` (downlink) and
    ``pilot_energy / noise_var_bs`` (uplink pilots).
    """

    symbol_energy: float = 1.0
    pilot_energy: float = 1.0
    noise_var_bs: float = 1.0
    noise_var_user: float = 1.0
    bandwidth_hz: float = 250e6
    temperature_k: float = 300.0

    def __post_init__(self) -> None:
        for name in ("symbol_energy", "pilot_energy", "bandwidth_hz", "temperature_k"):
            require(getattr(self, name) > 0, f"{name} must be > 0")
        for name in ("noise_var_bs", "noise_var_user"):
            require(getattr(self, name) >= 0, f"{name} must be >= 0")

    @classmethod
    def from_snr_db(cls, snr_db: float, pilot_snr_db: float = np.inf) -> "LinkBudget":
        """Unit noise budget with the given downlink and pilot SNRs in dB.

        An infinite pilot SNR is encoded as zero uplink noise.
        """
        es = 10.0 ** (snr_db / 10.0)
        noise_bs = 0.0 if np.isinf(pilot_snr_db) and pilot_snr_db > 0 else 10.0 ** (-pilot_snr_db / 10.0)
        return cls(symbol_energy=es, pilot_energy=1.0, noise_var_bs=noise_bs, noise_var_user=1.0)

    @property
    def snr(self) -> float:
        return self.symbol_energy / self.noise_var_user if self.noise_var_user > 0 else np.inf

    @property
    def pilot_snr(self) -> float:
        return self.pilot_energy / self.noise_var_bs if self.noise_var_bs > 0 else np.inf


def free_space_rx_power(tx_power, tx_gain, rx_gain, wavelength, distance, exponent=2.0):
    """Friis-type received power ``P_t G_t G_r (lambda/4pi)^2 d^-n``."""
    d = np.asarray(distance, dtype=float)
    if np.any(d <= 0):
        raise ConfigError("distance must be > 0")
    if wavelength <= 0:
        raise ConfigError("wavelength must be > 0")
    out = tx_power * tx_gain * rx_gain * (wavelength / (4.0 * np.pi)) ** 2 * d ** (-exponent)
    return float(out) if np.ndim(out) == 0 else out


def empirical_path_loss_db(distance_m, alpha=1.9, intercept=20.0, wavelength_m=0.01):
    """Log-distance path loss ``10 alpha log10(d) + intercept log10(4pi/lambda)`` in dB."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ConfigError("distance must be > 0")
    out = 10.0 * alpha * np.log10(d) + intercept * np.log10(4.0 * np.pi / wavelength_m)
    return float(out) if np.ndim(out) == 0 else out


def thermal_noise_dbm(bandwidth_hz, temperature_k=300.0):
    """Thermal noise power ``k_B T B`` in dBm."""
    if np.any(np.asarray(bandwidth_hz) <= 0) or temperature_k <= 0:
        raise ConfigError("bandwidth and temperature must be > 0")
    out = 10.0 * np.log10(BOLTZMANN * temperature_k * np.asarray(bandwidth_hz, dtype=float) / 1e-3)
    return float(out) if np.ndim(out) == 0 else out


def downlink_gain_from_geometry(user_distance_m, site_distance_m, alpha=1.9):
    """Interference-to-signal gain ratio of a neighbour site under log-distance loss.

    Returns ``(d_user / d_site)^alpha``: the intercept term cancels in the ratio.
    """
    require(user_distance_m > 0 and site_distance_m > 0, "distances must be > 0")
    return float((user_distance_m / site_distance_m) ** alpha)

