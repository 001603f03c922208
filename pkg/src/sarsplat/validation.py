"""Input validation helpers and the package exception hierarchy.

All user-facing entry points funnel their argument checking through these
helpers so error messages consistently name the offending input.
"""

from __future__ import annotations

import numpy as np


class SarsplatError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(SarsplatError, ValueError):
    """An input value violates a documented precondition."""


class DegenerateProjectionError(SarsplatError, ArithmeticError):
    """A projected 2D covariance is singular or indefinite."""


class NumericalError(SarsplatError, ArithmeticError):
    """A non-finite value appeared mid-computation (exit code 2 territory)."""


class StateError(SarsplatError, RuntimeError):
    """An operation was called without the forward state it requires."""


class DivergenceError(SarsplatError, RuntimeError):
    """Training produced non-finite losses twice in a row."""


def as_float_array(x, name: str, shape: tuple | None = None) -> np.ndarray:
    """Convert to a float64 ndarray, checking finiteness and (optionally) shape."""
    arr = np.asarray(x, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise InvalidParameterError(
            f"{name} must have shape {shape}, got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite values")
    return arr


def check_unit_quaternion(q, name: str = "rotation", tol: float = 1e-6) -> np.ndarray:
    q = as_float_array(q, name, (4,))
    n = float(np.linalg.norm(q))
    if n < tol:
        raise InvalidParameterError(f"{name} has near-zero norm {n:.3e}")
    return q / n


def check_sar_image(img, name: str = "image") -> np.ndarray:
    """Validate an H x W scattered-energy raster: 2D, finite, non-negative."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidParameterError(f"{name} must be 2D, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite values")
    if np.any(arr < 0):
        raise InvalidParameterError(f"{name} contains negative entries")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "images") -> None:
    if a.shape != b.shape:
        raise InvalidParameterError(
            f"{what} must have equal shapes, got {a.shape} vs {b.shape}"
        )


def check_points(points, name: str = "points", allow_empty: bool = False) -> np.ndarray:
    """Validate an (N, 3) coordinate array."""
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidParameterError(f"{name} must have shape (N, 3), got {arr.shape}")
    if not allow_empty and arr.shape[0] == 0:
        raise InvalidParameterError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite coordinates")
    return arr


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise InvalidParameterError(f"{name} must be a positive finite number, got {value}")
    return value
