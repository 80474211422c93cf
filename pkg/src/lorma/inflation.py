"""Rank-inflation operators for low-rank multiplicative adapters.

Two operators lift the rank of a (square) low-rank product ``B @ A``:

* permutation inflation rotates row ``i`` cyclically right by ``i``
  places, so entry ``(i, j)`` lands at ``(i, (j + i) % d)``. It only
  rearranges entries, hence it is linear, norm preserving and its adjoint
  equals its inverse (:func:`deflate_pi`).
* additive inflation adds the identity to the scaled product,
  ``s * BA + I``, whose rank is at least ``d - rank(BA)``.
"""

from enum import Enum

import numpy as np

from .validation import check_square


class InflationKind(str, Enum):
    NONE = "none"
    PERMUTATION = "permutation"
    ADDITIVE = "additive"


def _row_rotation_index(d, direction):
    cols = np.arange(d)
    rows = np.arange(d)[:, None]
    # gather index: out[i, j] = m[i, (j - direction * i) % d]
    return (cols[None, :] - direction * rows) % d


def inflate_pi(m):
    """Rotate row ``i`` of a square matrix right by ``i`` positions.

    >>> inflate_pi(np.array([[1., 0., 0.], [2., 0., 0.], [3., 0., 0.]]))
    array([[1., 0., 0.],
           [0., 2., 0.],
           [0., 0., 3.]])
    """
    m = check_square(m, "m")
    d = m.shape[0]
    return np.take_along_axis(m, _row_rotation_index(d, 1), axis=1)


def deflate_pi(m):
    """Inverse (and adjoint) of :func:`inflate_pi`: rotate row ``i`` left by ``i``."""
    m = check_square(m, "m")
    d = m.shape[0]
    return np.take_along_axis(m, _row_rotation_index(d, -1), axis=1)


def inflate_plus(ba, s):
    """Additive inflation ``s * ba + I``."""
    ba = check_square(ba, "ba")
    s = float(s)
    if not np.isfinite(s):
        raise ValueError(f"scaling must be finite, got {s}")
    return s * ba + np.eye(ba.shape[0])


def inflate(m, kind, s=1.0):
    """Apply the inflation ``kind`` to ``s * m``.

    ``none`` returns the scaled product unchanged.
    """
    kind = InflationKind(kind)
    if kind is InflationKind.ADDITIVE:
        return inflate_plus(m, s)
    scaled = float(s) * np.asarray(m, dtype=np.float64)
    if kind is InflationKind.PERMUTATION:
        return inflate_pi(scaled)
    return scaled
