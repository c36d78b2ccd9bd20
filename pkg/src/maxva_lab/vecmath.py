"""Elementwise float64 vector plumbing shared by the optimizer stack.

Coordinate vectors are plain 1-D numpy float64 arrays. Everything in this
module either maps coordinate by coordinate or reduces to a scalar; there
is deliberately no broadcasting magic and no tensor machinery.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

CoordVector = np.ndarray


class DimensionError(ValueError):
    """Two coordinate vectors that must align have different lengths."""


def as_vector(values: Sequence[float] | np.ndarray, *, check_finite: bool = True) -> CoordVector:
    """Coerce input to a 1-D float64 array and validate it.

    This is the boundary check: call sites that accept user input go
    through here, hot loops keep arrays in this form and do not revalidate.
    """
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {vec.shape}")
    if vec.size < 1:
        raise DimensionError("coordinate vectors must have at least one entry")
    if check_finite and not np.isfinite(vec).all():
        raise ValueError("coordinate vector contains NaN or Inf")
    return vec


def ewise_map2(a: CoordVector, b: CoordVector, f: Callable[[float, float], float]) -> CoordVector:
    """Apply a binary function coordinate by coordinate.

    `f` may be a numpy ufunc (applied directly) or a plain Python callable
    (applied entry by entry).
    """
    if len(a) != len(b):
        raise DimensionError(f"length mismatch: {len(a)} vs {len(b)}")
    if isinstance(f, np.ufunc):
        return f(a, b)
    return np.array([f(x, y) for x, y in zip(a, b)], dtype=np.float64)


def norm_sq(a: CoordVector) -> float:
    """Squared Euclidean norm."""
    arr = np.asarray(a, dtype=np.float64)
    return float(np.dot(arr, arr))


def norm_l1(a: CoordVector) -> float:
    """Sum of absolute values."""
    return float(np.abs(np.asarray(a, dtype=np.float64)).sum())


def mean_abs(a: CoordVector) -> float:
    """Mean absolute value; the scalar summary used for step-size reporting."""
    return float(np.abs(np.asarray(a, dtype=np.float64)).mean())
