"""Uniform linear array geometry.

Steering vectors, the array power pattern, beamwidth rules of thumb and the
angular-separation predicate used for user admission. Angles are in radians
and measured from the array axis, so the useful range is ``[0, pi]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import ConfigError

__all__ = [
    "ArrayGeometry",
    "SteeringVector",
    "steering_vector",
    "steering_matrix",
    "array_gain",
    "hpbw",
    "min_search_steps",
    "angular_separation_ok",
    "max_users",
    "search_grid",
    "detection_matrix",
    "snap_to_grid",
]

_HPBW_CONSTANT = 1.782
_SINGULAR_TOL = 1e-9


@dataclass(frozen=True)
class ArrayGeometry:
    """Half-wavelength uniform linear array.

    Parameters
    ----------
    num_elements : int
        Number of antenna elements (``M`` at the base station, ``P`` at a user).
    spacing_over_wavelength : float, optional
        Element spacing in wavelengths. Only 0.5 is supported.
    """

    num_elements: int
    spacing_over_wavelength: float = 0.5

    def __post_init__(self) -> None:
        if isinstance(self.num_elements, bool) or int(self.num_elements) != self.num_elements:
            raise ConfigError(f"num_elements must be an integer, got {self.num_elements!r}")
        if self.num_elements < 1:
            raise ConfigError(f"num_elements must be >= 1, got {self.num_elements}")
        if self.spacing_over_wavelength != 0.5:
            raise ConfigError("only half-wavelength spacing (0.5) is supported")
        object.__setattr__(self, "num_elements", int(self.num_elements))

    def steering(self, angle_rad: float) -> "SteeringVector":
        """Shortcut for :func:`steering_vector` on this geometry."""
        return steering_vector(self, angle_rad)


@dataclass(frozen=True)
class SteeringVector:
    """Array response of a ULA toward ``angle_rad``.

    Attributes
    ----------
    elements : ndarray of complex, shape (M,)
        Unit-modulus phase ramp with ``elements[0] == 1``.
    angle_rad : float
        Incidence angle in ``[0, pi]``.
    """

    elements: np.ndarray
    angle_rad: float


def _check_angles(angles: np.ndarray) -> None:
    if not np.all(np.isfinite(angles)) or np.any(angles < 0.0) or np.any(angles > np.pi):
        raise ConfigError("angles must lie in [0, pi] radians")


def steering_matrix(num_elements: int, angles_rad) -> np.ndarray:
    """Stack steering vectors column-wise.

    Parameters
    ----------
    num_elements : int
        Array size ``M``.
    angles_rad : array_like, shape (K,)
        Incidence angles in ``[0, pi]``.

    Returns
    -------
    ndarray of complex, shape (M, K)
        Column ``k`` has entries ``exp(-j*pi*n*cos(angles_rad[k]))``.
    """
    angles = np.atleast_1d(np.asarray(angles_rad, dtype=float))
    _check_angles(angles)
    n = np.arange(num_elements)[:, None]
    return np.exp(-1j * np.pi * n * np.cos(angles)[None, :])


def steering_vector(geometry: ArrayGeometry, angle_rad: float) -> SteeringVector:
    """Array response vector for a single incidence angle.

    Raises
    ------
    ConfigError
        If ``angle_rad`` is outside ``[0, pi]``.
    """
    elements = steering_matrix(geometry.num_elements, [angle_rad])[:, 0]
    return SteeringVector(elements=elements, angle_rad=float(angle_rad))


def array_gain(geometry: ArrayGeometry | int, delta_cos) -> np.ndarray | float:
    """Normalized ULA power pattern versus cosine offset.

    ``G(x) = sin^2(M*pi*x/2) / (M * sin^2(pi*x/2))``. The removable
    singularities at even integers ``x`` are evaluated with a second-order
    series so the peak value is ``M``.

    Parameters
    ----------
    geometry : ArrayGeometry or int
        Array (or its element count).
    delta_cos : float or array_like
        Difference of direction cosines.

    Returns
    -------
    float or ndarray
        Non-negative gain, same shape as ``delta_cos``.
    """
    m = geometry.num_elements if isinstance(geometry, ArrayGeometry) else int(geometry)
    x = np.asarray(delta_cos, dtype=float)
    den = np.sin(np.pi * x / 2.0)
    near = np.abs(den) < _SINGULAR_TOL
    safe_den = np.where(near, 1.0, den)
    out = np.sin(m * np.pi * x / 2.0) ** 2 / (m * safe_den**2)
    if np.any(near):
        # distance to the nearest grating lobe, where the pattern peaks at M
        e = x - 2.0 * np.round(x / 2.0)
        t = np.pi * e / 2.0
        series = m * (1.0 - (m * m - 1.0) * t * t / 3.0)
        out = np.where(near, series, out)
    if out.ndim == 0:
        return float(out)
    return out


def hpbw(geometry: ArrayGeometry) -> float:
    """Half-power beamwidth in the cosine domain, ``1.782 / M``."""
    if geometry.num_elements < 2:
        raise ConfigError("beamwidth requires at least two elements")
    return _HPBW_CONSTANT / geometry.num_elements


def min_search_steps(geometry: ArrayGeometry | int) -> int:
    """Smallest angular grid size that samples every main lobe, ``ceil(2M/1.782)``."""
    m = geometry.num_elements if isinstance(geometry, ArrayGeometry) else int(geometry)
    if m < 2:
        raise ConfigError("search grid sizing requires at least two elements")
    # integer arithmetic keeps exact multiples such as M=1782 exact
    return -(-2000 * m // 1782)


def angular_separation_ok(angles_rad, geometry: ArrayGeometry | int) -> bool:
    """Check the pairwise ``|cos a - cos b| >= 4/M`` admission rule."""
    m = geometry.num_elements if isinstance(geometry, ArrayGeometry) else int(geometry)
    angles = np.asarray(angles_rad, dtype=float).ravel()
    _check_angles(angles)
    if angles.size < 2:
        return True
    cosines = np.sort(np.cos(angles))
    # tiny slack absorbs rounding of cosines built on an exact 4/M lattice
    return bool(np.all(np.diff(cosines) >= 4.0 / m - 1e-12))


def max_users(geometry: ArrayGeometry | int) -> int:
    """Users that fit on ``[-1, 1]`` with ``4/M`` cosine spacing (about ``M/2``)."""
    m = geometry.num_elements if isinstance(geometry, ArrayGeometry) else int(geometry)
    return m // 2 + 1


def search_grid(num_steps: int) -> np.ndarray:
    """Uniform angular grid ``{0, pi/J, ..., (J-1)pi/J}``."""
    if num_steps < 2:
        raise ConfigError("the search grid needs at least two points")
    return np.arange(num_steps) * (np.pi / num_steps)


def detection_matrix(num_elements: int, num_steps: int) -> np.ndarray:
    """Matched-filter bank over the search grid.

    Column ``i`` is ``conj(steering(theta_i)) / sqrt(M)`` so that
    ``detection_matrix(...).T @ steering(theta_i)`` peaks at ``sqrt(M)``.
    """
    return np.conj(steering_matrix(num_elements, search_grid(num_steps))) / np.sqrt(num_elements)


def snap_to_grid(angles_rad, num_steps: int) -> np.ndarray:
    """Round angles to the nearest point of :func:`search_grid`."""
    angles = np.asarray(angles_rad, dtype=float)
    idx = np.clip(np.rint(angles * num_steps / np.pi), 0, num_steps - 1)
    return idx * (np.pi / num_steps)
