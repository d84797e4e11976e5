"""Argument checks and exception types shared across the package."""

from __future__ import annotations

import numbers

import numpy as np


class DomainError(ValueError):
    """Argument outside the mathematical domain of a function."""


class ConvergenceError(ArithmeticError):
    """An iterative or adaptive computation failed to reach its tolerance."""


def check_positive(value, name: str, *, strict: bool = True) -> float:
    value = float(value)
    if not np.isfinite(value) or (value <= 0 if strict else value < 0):
        bound = "> 0" if strict else ">= 0"
        raise ValueError(f"{name} must be finite and {bound}, got {value!r}")
    return value


def check_count(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_order(alpha, name: str = "alpha") -> float:
    """Fractional order restricted to the open interval (0, 1)."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"{name} must lie in (0, 1), got {alpha}")
    return alpha


def as_samples(f, times: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on ``times`` if callable, otherwise validate its length.

    The leading axis of the result always indexes time; trailing axes (if
    any) carry vector-valued samples.
    """
    if callable(f):
        values = [np.asarray(f(t), dtype=float) for t in times]
        out = np.stack(values) if values else np.zeros((0,))
    else:
        out = np.asarray(f, dtype=float)
    if out.shape[:1] != (len(times),):
        raise ValueError(
            f"expected {len(times)} samples along axis 0, got shape {out.shape}"
        )
    return out
