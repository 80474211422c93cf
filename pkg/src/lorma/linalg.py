"""Dense linear algebra for the adapter and analysis layers.

Matrices are 2-D float64 numpy arrays. The matrix product delegates to
numpy's BLAS-backed ``@``; the factorizations (SVD, QR, Hessenberg,
eigenvalues) are implemented here on top of vectorized numpy primitives.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalFailureError, RankDeficiencyError, ShapeError
from .validation import check_matrix, check_square

EPS = np.finfo(np.float64).eps

SVD_MAX_SWEEPS = 60
SVD_TOL = 1e-12
EIG_MAX_ITER_PER_EIGENVALUE = 60


class FlopCounter:
    """Opt-in operation counter threaded through instrumented routines.

    ``macs`` counts scalar multiply-accumulates performed inside matrix
    products (``m * n * p`` for an ``(m, n) @ (n, p)`` product) and
    ``elementwise`` counts scalar additions and scalings applied to whole
    matrices. ``flops`` reports the conventional two flops per
    multiply-accumulate.
    """

    def __init__(self):
        self.macs = 0
        self.elementwise = 0

    @property
    def flops(self):
        return 2 * self.macs + self.elementwise

    @property
    def multiply_adds(self):
        """Scalar operation count in the unit used by complexity tables."""
        return self.macs + self.elementwise

    def add_elementwise(self, n):
        self.elementwise += int(n)

    def reset(self):
        self.macs = 0
        self.elementwise = 0

    def __repr__(self):
        return f"FlopCounter(macs={self.macs}, elementwise={self.elementwise})"


def matmul(a, b, counter=None):
    """Matrix product ``a @ b``.

    Raises :class:`ShapeError` when inner dimensions disagree. When a
    :class:`FlopCounter` is supplied it is charged for the product.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    if counter is not None:
        counter.macs += a.shape[0] * a.shape[1] * b.shape[1]
    return a @ b


def scale(m, s, counter=None):
    if counter is not None:
        counter.add_elementwise(m.size)
    return s * m


def add(a, b, counter=None):
    if a.shape != b.shape:
        raise ShapeError(f"cannot add shapes {a.shape} and {b.shape}")
    if counter is not None:
        counter.add_elementwise(a.size)
    return a + b


@dataclass(frozen=True)
class SvdResult:
    """Thin singular value decomposition ``m = u @ diag(sigma) @ vt``."""

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray

    def reconstruct(self):
        return (self.u * self.sigma) @ self.vt


def _round_robin_rounds(n):
    """Pairings for a parallel Jacobi sweep (circle method).

    Returns a list of ``(p, q)`` index arrays; within a round no index
    appears twice, and over all rounds every pair appears exactly once.
    Odd ``n`` uses a phantom index ``n`` which is filtered out.
    """
    m = n if n % 2 == 0 else n + 1
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p = []
        q = []
        for i in range(m // 2):
            x, y = players[i], players[m - 1 - i]
            if x < n and y < n:
                p.append(min(x, y))
                q.append(max(x, y))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def _complete_orthonormal(q, keep):
    """Fill the columns of ``q`` not flagged in ``keep`` with an orthonormal
    completion of the kept columns."""
    m, n = q.shape
    basis = [q[:, j] for j in range(n) if keep[j]]
    out = q.copy()
    candidates = iter(np.eye(m))
    for j in range(n):
        if keep[j]:
            continue
        while True:
            v = next(candidates).copy()
            # two passes of Gram-Schmidt for stability
            for _ in range(2):
                for b in basis:
                    v -= (b @ v) * b
            norm = np.linalg.norm(v)
            if norm > 1e-8:
                v /= norm
                break
        basis.append(v)
        out[:, j] = v
    return out


def _jacobi_svd_tall(a, want_vectors=True):
    """One-sided (Hestenes) Jacobi on a matrix with ``rows >= cols``."""
    m, n = a.shape
    # power-of-two rescale (exact) keeps squared column norms in range
    amax = float(np.max(np.abs(a))) if a.size else 0.0
    expo = int(np.frexp(amax)[1]) if amax > 0.0 else 0
    work = np.ldexp(a, -expo)
    v = np.eye(n) if want_vectors else None
    rounds = _round_robin_rounds(n)
    converged = n == 1
    for _sweep in range(SVD_MAX_SWEEPS):
        if converged:
            break
        rotated = False
        # columns below eps * (largest column norm) are rounding noise
        floor = EPS * EPS * np.max(np.einsum("ij,ij->j", work, work))
        for p, q in rounds:
            if p.size == 0:
                continue
            wp = work[:, p]
            wq = work[:, q]
            alpha = np.einsum("ij,ij->j", wp, wp)
            beta = np.einsum("ij,ij->j", wq, wq)
            gamma = np.einsum("ij,ij->j", wp, wq)
            active = (np.abs(gamma) > SVD_TOL * np.sqrt(alpha * beta)) & (
                np.minimum(alpha, beta) > floor
            )
            if not np.any(active):
                continue
            rotated = True
            p, q = p[active], q[active]
            alpha, beta, gamma = alpha[active], beta[active], gamma[active]
            zeta = (beta - alpha) / (2.0 * gamma)
            t = np.copysign(1.0, zeta) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            wp, wq = work[:, p], work[:, q]
            work[:, p] = c * wp - s * wq
            work[:, q] = s * wp + c * wq
            if want_vectors:
                vp, vq = v[:, p], v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
        converged = not rotated
    if not converged:
        raise NumericalFailureError(
            f"Jacobi SVD did not converge within {SVD_MAX_SWEEPS} sweeps"
        )
    sigma = np.linalg.norm(work, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    scaled_sigma = np.ldexp(sigma, expo)
    if not want_vectors:
        return None, scaled_sigma, None
    work = work[:, order]
    v = v[:, order]
    sigma_max = sigma[0] if sigma.size else 0.0
    keep = sigma > max(m, n) * EPS * sigma_max
    if sigma_max == 0.0:
        keep[:] = False
    u = np.zeros_like(work)
    u[:, keep] = work[:, keep] / sigma[keep]
    if not np.all(keep):
        u = _complete_orthonormal(u, keep)
    return u, scaled_sigma, v.T


def svd(m):
    """Thin SVD by one-sided Jacobi with round-robin (parallel) ordering.

    Returns an :class:`SvdResult` with ``u`` of shape ``(rows, p)``,
    ``sigma`` of length ``p`` sorted non-increasing and ``vt`` of shape
    ``(p, cols)``, where ``p = min(rows, cols)``. Columns of ``u`` that
    belong to numerically zero singular values are an orthonormal
    completion, so ``u`` always has orthonormal columns.
    """
    m = check_matrix(m, "m")
    if m.shape[0] >= m.shape[1]:
        u, sigma, vt = _jacobi_svd_tall(m)
    else:
        v, sigma, ut = _jacobi_svd_tall(m.T.copy())
        u, vt = ut.T, v.T
    return SvdResult(u=np.ascontiguousarray(u), sigma=sigma, vt=np.ascontiguousarray(vt))


def singular_values(m):
    """Singular values only, non-increasing; skips accumulating vectors."""
    m = check_matrix(m, "m")
    if m.shape[0] < m.shape[1]:
        m = m.T.copy()
    return _jacobi_svd_tall(m, want_vectors=False)[1]


def rank_tolerance(shape, sigma_max):
    return max(shape) * EPS * sigma_max


def numerical_rank(m, sigma=None):
    """Number of singular values above ``max(rows, cols) * eps * sigma_max``.

    ``sigma`` may be passed when the singular values are already known.
    """
    m = check_matrix(m, "m")
    if sigma is None:
        if not np.any(m):
            return 0
        sigma = singular_values(m)
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma > rank_tolerance(m.shape, sigma[0])))


def left_pseudo_inverse(m0):
    """Left inverse ``V diag(1/sigma) U^T`` of a full-column-rank matrix.

    Raises :class:`RankDeficiencyError` naming the observed rank when
    ``m0`` is wide or column-rank deficient.
    """
    m0 = check_matrix(m0, "m0")
    rows, cols = m0.shape
    if rows < cols:
        raise ShapeError(f"left inverse needs rows >= cols, got shape {m0.shape}")
    res = svd(m0)
    rank = numerical_rank(m0, sigma=res.sigma)
    if rank != cols:
        raise RankDeficiencyError(
            f"matrix of shape {m0.shape} has numerical rank {rank}, "
            f"full column rank {cols} required",
            observed_rank=rank,
            required_rank=cols,
        )
    return (res.vt.T / res.sigma) @ res.u.T


def pseudo_inverse(m):
    """Moore-Penrose pseudo-inverse with singular values below the rank
    tolerance treated as zero. Works for any shape and rank."""
    m = check_matrix(m, "m")
    res = svd(m)
    rank = numerical_rank(m, sigma=res.sigma)
    u = res.u[:, :rank]
    vt = res.vt[:rank]
    return (vt.T / res.sigma[:rank]) @ u.T


def _householder(x):
    """Householder vector ``v`` (``v[0] == 1``) and ``beta`` such that
    ``(I - beta v v^T) x = -sign(x0) ||x|| e1``. ``beta == 0`` when ``x``
    is already a multiple of ``e1``."""
    v = np.array(x, dtype=np.float64, copy=True)
    sigma = v[1:] @ v[1:]
    if sigma == 0.0:
        v[0] = 1.0
        return v, 0.0
    norm = np.sqrt(v[0] * v[0] + sigma)
    v0 = v[0] + np.copysign(norm, v[0])
    v[1:] /= v0
    v[0] = 1.0
    beta = 2.0 / (v @ v)
    return v, beta


def qr_decompose(m):
    """Thin Householder QR of a tall matrix.

    Returns ``(q, r)`` with ``q`` of shape ``(rows, cols)`` having
    orthonormal columns and ``r`` upper triangular with a non-negative
    diagonal.
    """
    m = check_matrix(m, "m")
    rows, cols = m.shape
    if rows < cols:
        raise ShapeError(f"qr_decompose needs rows >= cols, got shape {m.shape}")
    r = m.copy()
    reflectors = []
    for k in range(cols):
        v, beta = _householder(r[k:, k])
        reflectors.append((v, beta))
        if beta != 0.0:
            r[k:, k:] -= beta * np.outer(v, v @ r[k:, k:])
            r[k + 1:, k] = 0.0
    q = np.eye(rows, cols)
    for k in range(cols - 1, -1, -1):
        v, beta = reflectors[k]
        if beta != 0.0:
            q[k:, k:] -= beta * np.outer(v, v @ q[k:, k:])
    r = np.triu(r[:cols])
    signs = np.where(np.diag(r) < 0.0, -1.0, 1.0)
    return q * signs, r * signs[:, None]


def hessenberg(m):
    """Upper Hessenberg form similar to ``m`` (Householder reduction)."""
    h = check_square(m, "m").copy()
    n = h.shape[0]
    for k in range(n - 2):
        v, beta = _householder(h[k + 1:, k])
        if beta == 0.0:
            continue
        h[k + 1:, k:] -= beta * np.outer(v, v @ h[k + 1:, k:])
        h[:, k + 1:] -= beta * np.outer(h[:, k + 1:] @ v, v)
        h[k + 2:, k] = 0.0
    return h


def _eig_2x2(a, b, c, d):
    half_tr = 0.5 * (a + d)
    disc = 0.25 * (a - d) ** 2 + b * c
    if disc >= 0.0:
        root = np.sqrt(disc)
        # avoid cancellation in the smaller-magnitude root
        big = half_tr + np.copysign(root, half_tr) if half_tr != 0.0 else root
        det = a * d - b * c
        small = det / big if big != 0.0 else half_tr - root
        return [complex(big), complex(small)]
    root = np.sqrt(-disc)
    return [complex(half_tr, root), complex(half_tr, -root)]


def _sort_eigenvalues(values):
    return sorted(values, key=lambda z: (-abs(z), -z.real, -z.imag))


def eigenvalues(m):
    """All eigenvalues of a square matrix, sorted by descending modulus.

    Reduces to Hessenberg form and runs the implicit double-shift
    (Francis) QR iteration with deflation. Ties in modulus are ordered by
    descending real part, then descending imaginary part.
    """
    h = hessenberg(m)
    n = h.shape[0]
    eigs = []
    hi = n - 1
    its = 0
    max_its = EIG_MAX_ITER_PER_EIGENVALUE
    norm = np.abs(h).sum()
    while hi >= 0:
        if hi == 0:
            eigs.append(complex(h[0, 0]))
            break
        # locate the start of the unreduced block ending at row hi
        lo = hi
        while lo > 0:
            scale_ = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if scale_ == 0.0:
                scale_ = norm
            if abs(h[lo, lo - 1]) <= EPS * scale_:
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eigs.append(complex(h[hi, hi]))
            hi -= 1
            its = 0
            continue
        if lo == hi - 1:
            eigs.extend(_eig_2x2(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi]))
            hi -= 2
            its = 0
            continue
        its += 1
        if its > max_its:
            raise NumericalFailureError(
                f"QR iteration exceeded {max_its} iterations for one eigenvalue"
            )
        if its % 10 == 0:
            # exceptional shift to break cycles
            w = abs(h[hi, hi - 1]) + abs(h[hi - 1, hi - 2])
            s = 1.5 * w
            t = w * w
        else:
            s = h[hi - 1, hi - 1] + h[hi, hi]
            t = h[hi - 1, hi - 1] * h[hi, hi] - h[hi - 1, hi] * h[hi, hi - 1]
        x = h[lo, lo] * h[lo, lo] + h[lo, lo + 1] * h[lo + 1, lo] - s * h[lo, lo] + t
        y = h[lo + 1, lo] * (h[lo, lo] + h[lo + 1, lo + 1] - s)
        z = h[lo + 1, lo] * h[lo + 2, lo + 1]
        for k in range(lo, hi - 1):
            v, beta = _householder([x, y, z])
            if beta != 0.0:
                q = max(lo, k - 1)
                blk = h[k:k + 3, q:hi + 1]
                blk -= beta * np.outer(v, v @ blk)
                r = min(k + 3, hi)
                blk = h[lo:r + 1, k:k + 3]
                blk -= beta * np.outer(blk @ v, v)
            x = h[k + 1, k]
            y = h[k + 2, k]
            if k < hi - 2:
                z = h[k + 3, k]
        v, beta = _householder([x, y])
        if beta != 0.0:
            blk = h[hi - 1:hi + 1, hi - 2:hi + 1]
            blk -= beta * np.outer(v, v @ blk)
            blk = h[lo:hi + 1, hi - 1:hi + 1]
            blk -= beta * np.outer(blk @ v, v)
    return _sort_eigenvalues(eigs)


def frobenius_norm(m):
    m = np.asarray(m, dtype=np.float64)
    return float(np.sqrt(np.sum(m * m)))
