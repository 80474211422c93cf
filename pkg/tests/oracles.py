"""Reference computations that share no code path with the package.

They are deliberately naive: triple loops, exact rational elimination,
classical two-sided Jacobi, normal equations.
"""

import math
from fractions import Fraction

import numpy as np


def matmul_loops(a, b):
    n, m = len(a), len(b[0])
    inner = len(b)
    return [[sum(a[i][t] * b[t][j] for t in range(inner)) for j in range(m)] for i in range(n)]


def exact_rank(m):
    """Rank by Gaussian elimination over the rationals (exact)."""
    rows = [[Fraction(v) for v in row] for row in np.asarray(m).tolist()]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for col in range(ncols):
        pivot = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][col] != 0:
                f = rows[i][col] / rows[rank][col]
                rows[i] = [x - f * y for x, y in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def integer_low_rank(rng, n, m, r, lo=-3, hi=3):
    """Integer matrix ``U @ V`` with small entries and rank ``<= r``."""
    u = rng.integers(lo, hi + 1, size=(n, r))
    v = rng.integers(lo, hi + 1, size=(r, m))
    return (u @ v).astype(np.float64)


def jacobi_symmetric_eigenvalues(s, tol=1e-14, max_sweeps=100):
    """Classical cyclic Jacobi for a symmetric matrix; returns eigenvalues
    sorted by descending modulus."""
    a = np.array(s, dtype=np.float64, copy=True)
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = math.sqrt(sum(a[i, j] ** 2 for i in range(n) for j in range(n) if i != j))
        if off <= tol * math.sqrt(float(np.sum(a * a))):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s_ = t * c
                rot = np.eye(n)
                rot[p, p] = rot[q, q] = c
                rot[p, q] = s_
                rot[q, p] = -s_
                a = rot.T @ a @ rot
    eig = np.diag(a)
    return sorted(eig, key=lambda z: (-abs(z), -z))


def normal_equations_left_inverse(m0):
    m0 = np.asarray(m0, dtype=np.float64)
    return np.linalg.solve(m0.T @ m0, m0.T)


def normal_equations_lstsq(m0, m):
    """Least-squares ``X`` minimizing ``||m0 X - m||`` via ``m0^T m0 X = m0^T m``."""
    return np.linalg.solve(m0.T @ m0, m0.T @ m)


def central_difference(f, x, step=1e-4):
    """Gradient of scalar ``f`` at array ``x`` by central differences."""
    x = np.array(x, dtype=np.float64, copy=True)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        fp = f(x)
        x[idx] = orig - step
        fm = f(x)
        x[idx] = orig
        g[idx] = (fp - fm) / (2.0 * step)
    return g


def max_relative_error(a, b, floor=1e-8):
    a = np.asarray(a)
    b = np.asarray(b)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def frobenius_by_sum(a, b):
    total = 0.0
    for x, y in zip(np.ravel(a), np.ravel(b)):
        total += (x - y) ** 2
    return math.sqrt(total)
