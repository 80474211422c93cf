"""Constructive checks that multiplicative maps can reach target weights.

* pre-multiplication: for ``m0`` (``n x m``, full column rank) and any
  ``m`` of the same shape, ``m @ pinv_left(m0)`` maps ``m0`` onto ``m``.
* post-multiplication by an ``m x m`` matrix cannot do the same in
  general; the least-squares residual exhibits a counterexample.
* for square invertible ``m0`` both sides work.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import RankDeficiencyError, ShapeError
from .rng import check_random_state
from .validation import check_matrix, check_same_shape

FEASIBILITY_RTOL = 1e-8


@dataclass(frozen=True)
class ExistenceCertificate:
    """A multiplier together with how well it reproduces the target.

    ``side`` is ``"pre"`` (``multiplier @ m0``) or ``"post"``
    (``m0 @ multiplier``).
    """

    multiplier: np.ndarray
    residual: float
    feasible: bool
    side: str = "pre"

    def recompute_residual(self, m0, m):
        if self.side == "pre":
            return linalg.frobenius_norm(self.multiplier @ m0 - m)
        return linalg.frobenius_norm(m0 @ self.multiplier - m)


def _certificate(multiplier, m0, m, side):
    product = multiplier @ m0 if side == "pre" else m0 @ multiplier
    residual = linalg.frobenius_norm(product - m)
    feasible = residual < FEASIBILITY_RTOL * max(1.0, linalg.frobenius_norm(m))
    return ExistenceCertificate(multiplier, residual, bool(feasible), side)


def _require_full_column_rank(m0):
    rank = linalg.numerical_rank(m0)
    if rank != m0.shape[1]:
        raise RankDeficiencyError(
            f"m0 of shape {m0.shape} has rank {rank}; full column rank "
            f"{m0.shape[1]} is required",
            observed_rank=rank,
            required_rank=m0.shape[1],
        )


def construct_premultiplier(m0, m):
    """``M_A = m @ left_pseudo_inverse(m0)`` so that ``M_A @ m0 == m``."""
    m0, m = check_same_shape(m0, m, ("m0", "m"))
    if m0.shape[0] < m0.shape[1]:
        raise ShapeError(f"m0 must be tall, got shape {m0.shape}")
    _require_full_column_rank(m0)
    multiplier = m @ linalg.left_pseudo_inverse(m0)
    return _certificate(multiplier, m0, m, "pre")


def best_postmultiplier(m0, m):
    """Least-squares ``X`` minimizing ``||m0 @ X - m||_F``."""
    m0, m = check_same_shape(m0, m, ("m0", "m"))
    multiplier = linalg.pseudo_inverse(m0) @ m
    return _certificate(multiplier, m0, m, "post")


def square_both_sides(m0, m):
    """Pre- and post-multipliers ``m @ inv(m0)`` and ``inv(m0) @ m``."""
    m0, m = check_same_shape(m0, m, ("m0", "m"))
    if m0.shape[0] != m0.shape[1]:
        raise ShapeError(f"m0 must be square, got shape {m0.shape}")
    _require_full_column_rank(m0)
    inv = linalg.left_pseudo_inverse(m0)
    return _certificate(m @ inv, m0, m, "pre"), _certificate(inv @ m, m0, m, "post")


def counterexample(m):
    """The ``n = 2m`` instance ``m0 = [I; 0]``, target ``[0; I]``."""
    m0 = np.vstack([np.eye(m), np.zeros((m, m))])
    target = np.vstack([np.zeros((m, m)), np.eye(m)])
    return m0, target


def random_full_column_rank(rng, n, m):
    while True:
        m0 = rng.normal_matrix(n, m)
        if linalg.numerical_rank(m0) == m:
            return m0


@dataclass(frozen=True)
class ClaimResult:
    claim: str
    passed: bool
    detail: str


def run_theory_suite(seed=0, n_pre=200, n_square=100, n_dof=100):
    """Run every claim check; returns a list of :class:`ClaimResult`."""
    rng = check_random_state(seed)
    results = []

    worst = 0.0
    ok = True
    for i in range(n_pre):
        n = 2 + rng.integer(31)  # 2..32
        mcols = 1 + rng.integer(n - 1)  # 1..n-1, strictly tall
        m0 = random_full_column_rank(rng, n, mcols)
        target = rng.normal_matrix(n, mcols)
        cert = construct_premultiplier(m0, target)
        worst = max(worst, cert.residual)
        ok &= cert.residual < 1e-8 and cert.feasible
    results.append(ClaimResult(
        "pre-multiplier exists for full-column-rank m0",
        ok, f"{n_pre} instances, n<=32, max residual {worst:.3e}",
    ))

    worst = 0.0
    ok = True
    for _ in range(n_square):
        m0 = random_full_column_rank(rng, 8, 8)
        target = rng.normal_matrix(8, 8)
        pre, post = square_both_sides(m0, target)
        worst = max(worst, pre.residual, post.residual)
        ok &= pre.residual < 1e-8 and post.residual < 1e-8
    results.append(ClaimResult(
        "square invertible m0: pre and post multipliers exist",
        ok, f"{n_square} instances 8x8, max residual {worst:.3e}",
    ))

    for m in (1, 2, 4, 8):
        m0, target = counterexample(m)
        cert = best_postmultiplier(m0, target)
        err = abs(cert.residual - math.sqrt(m))
        results.append(ClaimResult(
            f"post-multiplication counterexample m={m}",
            err <= 1e-10 and not cert.feasible,
            f"residual {cert.residual:.12f} vs sqrt(m) {math.sqrt(m):.12f}",
        ))

    reached = 0
    for _ in range(n_dof):
        n = 3 + rng.integer(14)  # 3..16
        mcols = 1 + rng.integer(n - 1)
        m0 = random_full_column_rank(rng, n, mcols)
        target = rng.normal_matrix(n, mcols)
        if best_postmultiplier(m0, target).residual < 1e-6:
            reached += 1
    results.append(ClaimResult(
        "random tall targets unreachable by post-multiplication",
        reached == 0, f"{reached}/{n_dof} targets reached",
    ))
    return results
