"""Shared error types, RNG plumbing and small numeric helpers."""

from __future__ import annotations

import numbers

import numpy as np

__all__ = [
    "ConfigError",
    "IllConditionedError",
    "as_generator",
    "complex_normal",
    "require",
]


class ConfigError(ValueError):
    """A scenario or parameter set violates a documented invariant."""


class IllConditionedError(ArithmeticError):
    """A matrix inversion was refused because the Gram matrix is near singular."""


def require(condition: bool, message: str) -> None:
    """Raise :class:`ConfigError` with ``message`` unless ``condition`` holds."""
    if not condition:
        raise ConfigError(message)


def as_generator(seed) -> np.random.Generator:
    """Normalize a seed-like value into a ``numpy.random.Generator``.

    Accepts ``None``, integers, integer sequences, ``SeedSequence`` instances
    and existing generators (returned unchanged, so state is shared).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    if seed is None or isinstance(seed, numbers.Integral):
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence(list(seed)))


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """Draw circularly-symmetric complex Gaussian samples CN(0, variance)."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
