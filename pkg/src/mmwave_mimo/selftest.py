"""Fast numerical invariants checked by ``mmwave-mimo selftest``.

Each check returns ``None`` on success or a short failure description.
The suite is deterministic and runs in well under a second.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .analysis import perturbed_inverse_approx
from .array_geometry import array_gain, steering_matrix
from .channel_model import RicianChannelSpec, draw_channel
from .pilot_estimation import make_pilot_book
from .precoding import build_zf, downlink_link, effective_rows
from .aoa_estimation import perfect_beams

__all__ = ["CHECKS", "run_selftest"]

_SEED = 20240601


def _steering_identities() -> str | None:
    a = steering_matrix(64, np.linspace(0.1, 3.0, 7))
    if not np.allclose(np.abs(a), 1.0, atol=1e-12):
        return "steering entries are not unit modulus"
    if not np.allclose(np.real(np.einsum("mk,mk->k", a.conj(), a)), 64.0, rtol=1e-12):
        return "steering vector norm is not M"
    back = steering_matrix(64, np.array([np.pi - 0.4]))
    fwd = steering_matrix(64, np.array([0.4]))
    if not np.allclose(back, fwd.conj(), atol=1e-12):
        return "steering(pi - theta) is not conj(steering(theta))"
    return None


def _array_gain_limits() -> str | None:
    for m in (1, 2, 17, 128):
        for x in (0.0, 2.0, -2.0, 1e-13):
            if not np.isclose(array_gain(m, x), m, rtol=1e-9):
                return f"array gain at cosine offset {x} is {array_gain(m, x)!r}, expected {m}"
        near = array_gain(m, 1e-7)
        far = array_gain(m, 1e-3)
        if not (np.isfinite(near) and abs(near - m) < 1e-6 * m and far <= m):
            return f"array gain not continuous at the main-lobe peak for M={m}"
    # mean over a full period of the cosine offset is one
    x = np.linspace(-1.0, 1.0, 40001)[:-1]
    if not np.isclose(np.mean(array_gain(32, x)), 1.0, rtol=1e-6):
        return "array gain does not average to one over a period"
    return None


def _zf_nulling() -> str | None:
    rng = np.random.default_rng(_SEED)
    angles = np.array([0.6, 1.2, 1.7, 2.4])
    chans = [
        draw_channel(RicianChannelSpec(2.0, 64, 8, strongest_bs_angle=t, strongest_user_angle=1.0), rng)
        for t in angles
    ]
    beams = perfect_beams(chans)
    rows = effective_rows(chans, beams)
    link = downlink_link(rows, build_zf(rows.T), 1.0, 1.0)
    if np.max(link.intra_interf / link.desired_power) > 1e-10:
        return "ZF leaves inter-user interference above 1e-10 of the desired power"
    return None


def _pilot_orthogonality() -> str | None:
    for n in (1, 3, 8):
        book = make_pilot_book(n, 2.5)
        gram = book.matrix.T @ book.matrix.conj()
        if not np.allclose(gram, 2.5 * np.eye(n), atol=1e-12):
            return f"pilot book of size {n} is not orthogonal with energy E_P"
    return None


def _perturbed_inverse_scaling() -> str | None:
    rng = np.random.default_rng(_SEED)
    b = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    k = b @ b.conj().T + 8 * np.eye(8)
    d0 = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    d0 = (d0 + d0.conj().T) / 2
    d0 /= np.linalg.norm(d0, 2)
    scales = np.logspace(-3, -1, 5)
    errs = [
        np.linalg.norm(perturbed_inverse_approx(k, s * d0, "first") - np.linalg.inv(k + s * d0), 2) for s in scales
    ]
    slope = np.polyfit(np.log(scales), np.log(errs), 1)[0]
    if abs(slope - 2.0) > 0.2:
        return f"first-order inverse error slope is {slope:.3f}, expected 2"
    return None


CHECKS: dict[str, Callable[[], str | None]] = {
    "steering_identities": _steering_identities,
    "array_gain_limits": _array_gain_limits,
    "zf_nulling": _zf_nulling,
    "pilot_orthogonality": _pilot_orthogonality,
    "perturbed_inverse_scaling": _perturbed_inverse_scaling,
}


def run_selftest() -> tuple[str, str] | None:
    """Run every check in order; return ``(name, reason)`` of the first failure."""
    for name, check in CHECKS.items():
        try:
            reason = check()
        except Exception as exc:  # a crash is a failed invariant too
            reason = f"{type(exc).__name__}: {exc}"
        if reason is not None:
            return name, reason
    return None
