"""Metrics for comparing weight updates learned by different adapters.

:func:`compare_updates` bundles five statistics for a reference and a
test update, and repeats them against a random matrix of matched
Frobenius norm as a chance-level baseline.
"""

import math
from dataclasses import dataclass, fields

import numpy as np

from . import linalg
from .exceptions import RankDeficiencyError, ShapeError, UndefinedMetricError
from .rng import check_random_state
from .validation import check_matrix, check_same_shape, check_square

METRIC_NAMES = ("frobenius", "cosine", "sv_ssd_r", "eig_ssd_r", "theta1")


def frobenius_distance(w1, w2):
    w1, w2 = check_same_shape(w1, w2, ("w1", "w2"))
    return linalg.frobenius_norm(w1 - w2)


def flattened_cosine(w1, w2):
    """Cosine similarity of the flattened matrices."""
    w1, w2 = check_same_shape(w1, w2, ("w1", "w2"))
    n1 = linalg.frobenius_norm(w1)
    n2 = linalg.frobenius_norm(w2)
    if n1 == 0.0 or n2 == 0.0:
        raise UndefinedMetricError("cosine similarity is undefined for a zero matrix")
    c = float(np.sum(w1 * w2)) / (n1 * n2)
    return min(1.0, max(-1.0, c))


def _check_r(r, limit):
    if isinstance(r, bool) or not isinstance(r, (int, np.integer)) or not 1 <= r <= limit:
        raise ValueError(f"r must be an integer in [1, {limit}], got {r!r}")
    return int(r)


def top_r_singular_ssd(w1, w2, r):
    """Sum of squared differences of the ``r`` largest singular values."""
    w1 = check_matrix(w1, "w1")
    w2 = check_matrix(w2, "w2")
    r = _check_r(r, min(min(w1.shape), min(w2.shape)))
    s1 = linalg.singular_values(w1)[:r]
    s2 = linalg.singular_values(w2)[:r]
    return float(np.sum((s1 - s2) ** 2))


def top_r_eigen_ssd(w1, w2, r):
    """Sum of squared differences of the moduli of the ``r`` eigenvalues of
    largest modulus. Moduli are compared so that complex conjugate pairs
    are handled without choosing a branch."""
    w1 = check_square(w1, "w1")
    w2 = check_square(w2, "w2")
    if w1.shape != w2.shape:
        raise ShapeError(f"shapes differ: {w1.shape} and {w2.shape}")
    r = _check_r(r, w1.shape[0])
    e1 = np.abs(np.array(linalg.eigenvalues(w1)[:r]))
    e2 = np.abs(np.array(linalg.eigenvalues(w2)[:r]))
    return float(np.sum((e1 - e2) ** 2))


def _left_basis(w, k, name):
    res = linalg.svd(w)
    rank = linalg.numerical_rank(w, sigma=res.sigma)
    if k > rank:
        raise RankDeficiencyError(
            f"{name} has numerical rank {rank}, cannot take a {k}-dimensional subspace",
            observed_rank=rank,
            required_rank=k,
        )
    return res.u[:, :k]


def principal_angle_theta1(w1, w2, k):
    """Smallest principal angle (radians) between the spans of the top-``k``
    left singular vectors of ``w1`` and ``w2``."""
    w1 = check_matrix(w1, "w1")
    w2 = check_matrix(w2, "w2")
    if w1.shape[0] != w2.shape[0]:
        raise ShapeError(f"row counts differ: {w1.shape} and {w2.shape}")
    k = _check_r(k, min(min(w1.shape), min(w2.shape)))
    q1 = _left_basis(w1, k, "w1")
    q2 = _left_basis(w2, k, "w2")
    cos_max = linalg.singular_values(q1.T @ q2)[0]
    return math.acos(min(1.0, max(-1.0, cos_max)))


@dataclass(frozen=True)
class MetricsReport:
    """Five comparison statistics for one pair of matrices.

    ``eig_ssd_r`` is ``None`` for non-square inputs. ``random_baseline``
    holds the same statistics for the reference against a norm-matched
    random matrix, when computed.
    """

    frobenius: float
    cosine: float
    sv_ssd_r: float
    eig_ssd_r: float
    theta1: float
    r_used: int
    random_baseline: "MetricsReport" = None

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "random_baseline"}


def _metrics(ref, test, r):
    square = ref.shape[0] == ref.shape[1]
    rank_cap = min(linalg.numerical_rank(ref), linalg.numerical_rank(test))
    k = max(1, min(r, rank_cap))
    return MetricsReport(
        frobenius=frobenius_distance(ref, test),
        cosine=flattened_cosine(ref, test),
        sv_ssd_r=top_r_singular_ssd(ref, test, r),
        eig_ssd_r=top_r_eigen_ssd(ref, test, r) if square else None,
        theta1=principal_angle_theta1(ref, test, k) if rank_cap > 0 else None,
        r_used=k,
    )


def random_baseline(ref, seed=0):
    """Gaussian matrix rescaled to the Frobenius norm of ``ref``."""
    ref = check_matrix(ref, "ref")
    rng = check_random_state(seed)
    g = rng.normal_matrix(*ref.shape)
    return g * (linalg.frobenius_norm(ref) / linalg.frobenius_norm(g))


def compare_updates(dw_ref, dw_test, r, seed=0):
    """Compare two updates and a norm-matched random baseline.

    The principal angle uses ``min(r, rank(ref), rank(test))`` dimensions;
    the number actually used is reported as ``r_used``.
    """
    dw_ref, dw_test = check_same_shape(dw_ref, dw_test, ("dw_ref", "dw_test"))
    r = _check_r(r, min(dw_ref.shape))
    baseline = _metrics(dw_ref, random_baseline(dw_ref, seed), r)
    report = _metrics(dw_ref, dw_test, r)
    return MetricsReport(**report.as_dict(), random_baseline=baseline)


def report_rows(report):
    """Rows ``(metric, ref_vs_test, ref_vs_random)`` for CSV export."""
    base = report.random_baseline
    rows = []
    for name in METRIC_NAMES:
        rows.append((name, getattr(report, name), getattr(base, name) if base else None))
    rows.append(("r_used", report.r_used, base.r_used if base else None))
    return rows
