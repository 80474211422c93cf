"""Input validation helpers, in the spirit of ``sklearn.utils.check_array``.

Every public entry point funnels its matrix arguments through
:func:`check_matrix` so that downstream code can assume a finite, 2-D,
C-contiguous float64 array.
"""

import numpy as np

from .exceptions import ShapeError


def check_matrix(m, name="matrix", allow_empty=False):
    """Return ``m`` as a finite 2-D float64 array, or raise.

    1-D input is rejected rather than silently reshaped; callers decide
    whether a vector is a row or a column.
    """
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ShapeError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return np.ascontiguousarray(arr)


def check_square(m, name="matrix"):
    arr = check_matrix(m, name)
    if arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_same_shape(a, b, names=("a", "b")):
    a = check_matrix(a, names[0])
    b = check_matrix(b, names[1])
    if a.shape != b.shape:
        raise ShapeError(
            f"{names[0]} and {names[1]} must have the same shape, "
            f"got {a.shape} and {b.shape}"
        )
    return a, b


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value <= 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return int(value)
