"""Closed-form reverse-mode gradients of the adapter forward passes.

Given ``upstream = dL/dh`` for ``h = forward(state, x)``, :func:`backward`
returns ``dL/db``, ``dL/da`` and ``dL/dx``. There is never a gradient for
the frozen ``w0``.

For permutation inflation the multiplier is ``M = I_pi(s B A)``. Since
``I_pi`` is a fixed rearrangement, the gradient with respect to ``s B A``
is ``deflate_pi(dL/dM)``, after which the ordinary product rule applies.
"""

from dataclasses import dataclass

import numpy as np

from .adapters import AdapterVariant, MultiplySide, forward, transform_matrix
from .exceptions import ConfigurationError, ShapeError
from .inflation import deflate_pi
from .rng import check_random_state
from .validation import check_matrix

FD_STEP = 1e-4
FD_DENOM_FLOOR = 1e-8
GRAD_CHECK_MAX_DIM = 64


@dataclass(frozen=True)
class GradientBundle:
    d_b: np.ndarray
    d_a: np.ndarray
    d_x: np.ndarray


def _inner_backward(state, inner_in, g):
    """Gradients through the square multiplier applied to ``inner_in``.

    ``g`` is the gradient with respect to the multiplier's output.
    Returns ``(d_b, d_a, d_inner_in)``.
    """
    b, a, s = state.b, state.a, state.scaling
    variant = state.variant
    if variant is AdapterVariant.LORMA_NAIVE:
        bt_g = b.T @ g
        return g @ (a @ inner_in).T, bt_g @ inner_in.T, a.T @ bt_g
    if variant is AdapterVariant.LORMA_PLUS:
        bt_g = b.T @ g
        d_b = s * (g @ (a @ inner_in).T)
        d_a = s * (bt_g @ inner_in.T)
        return d_b, d_a, g + s * (a.T @ bt_g)
    # permutation inflation
    m = transform_matrix(state)
    grad_scaled = deflate_pi(g @ inner_in.T)
    return s * (grad_scaled @ a.T), s * (b.T @ grad_scaled), m.T @ g


def backward(state, x, upstream):
    """Gradients of a scalar loss through :func:`forward`.

    Parameters
    ----------
    state : AdapterState
    x : ndarray of shape (k, batch)
        Input that was passed to ``forward``.
    upstream : ndarray of shape (d, batch)
        Gradient of the loss with respect to the forward output.
    """
    x = check_matrix(x, "x")
    upstream = check_matrix(upstream, "upstream")
    w0 = state.w0
    d, k = w0.shape
    if x.shape[0] != k:
        raise ShapeError(f"x must have {k} rows, got {x.shape}")
    if upstream.shape != (d, x.shape[1]):
        raise ShapeError(
            f"upstream must have shape {(d, x.shape[1])}, got {upstream.shape}"
        )
    b, a, s = state.b, state.a, state.scaling
    g = upstream

    if state.variant is AdapterVariant.LORA:
        ax = a @ x
        bt_g = b.T @ g
        d_b = s * (g @ ax.T)
        d_a = s * (bt_g @ x.T)
        d_x = w0.T @ g + s * (a.T @ bt_g)
        return GradientBundle(d_b=d_b, d_a=d_a, d_x=d_x)

    if state.side is MultiplySide.PRE:
        u = w0 @ x
        d_b, d_a, d_u = _inner_backward(state, u, g)
        return GradientBundle(d_b=d_b, d_a=d_a, d_x=w0.T @ d_u)

    d_b, d_a, d_x = _inner_backward(state, x, w0.T @ g)
    return GradientBundle(d_b=d_b, d_a=d_a, d_x=d_x)


def probe_loss(state, x, y):
    """``0.5 * ||forward(state, x) - y||_F^2``."""
    r = forward(state, x) - y
    return 0.5 * float(np.sum(r * r))


@dataclass(frozen=True)
class GradCheckReport:
    """Worst disagreement between analytic and numeric gradients."""

    max_rel_error: float
    parameter: str
    index: tuple
    analytic: float
    numeric: float
    n_checked: int

    def passed(self, tol=1e-4):
        return self.max_rel_error < tol


def _relative_error(analytic, numeric):
    denom = max(abs(analytic), abs(numeric), FD_DENOM_FLOOR)
    return abs(analytic - numeric) / denom


def grad_check(state, x, y=None, seed=0, wrt=("b", "a"), step=FD_STEP, backward_fn=None):
    """Compare :func:`backward` with central finite differences.

    Every entry of the parameters named in ``wrt`` (any of ``"b"``,
    ``"a"``, ``"x"``) is perturbed by ``+-step`` under the probe loss
    ``0.5 * ||forward - y||_F^2``. When ``y`` is omitted a random target
    is drawn from ``seed``. ``backward_fn`` replaces :func:`backward`,
    which is how the checker itself is tested.

    Entries are visited in a fixed order (parameter, then row-major), and
    ties keep the first coordinate, so the report is deterministic.
    """
    d, k = state.w0.shape
    if max(d, k, state.config.r) > GRAD_CHECK_MAX_DIM:
        raise ConfigurationError(
            f"grad_check is limited to dimensions <= {GRAD_CHECK_MAX_DIM}, got {d}x{k}"
        )
    x = check_matrix(x, "x")
    if y is None:
        rng = check_random_state(seed)
        y = rng.normal_matrix(d, x.shape[1])
    y = check_matrix(y, "y")
    backward_fn = backward if backward_fn is None else backward_fn
    upstream = forward(state, x) - y
    grads = backward_fn(state, x, upstream)
    analytic = {"b": grads.d_b, "a": grads.d_a, "x": grads.d_x}

    worst = None
    n_checked = 0
    for name in wrt:
        if name not in analytic:
            raise ValueError(f"unknown parameter {name!r}")
        work = state.copy()
        xx = x.copy()
        target = xx if name == "x" else getattr(work, name)
        for idx in np.ndindex(target.shape):
            orig = target[idx]
            target[idx] = orig + step
            plus = probe_loss(work, xx, y)
            target[idx] = orig - step
            minus = probe_loss(work, xx, y)
            target[idx] = orig
            numeric = (plus - minus) / (2.0 * step)
            an = float(analytic[name][idx])
            err = _relative_error(an, numeric)
            n_checked += 1
            if worst is None or err > worst[0]:
                worst = (err, name, tuple(int(i) for i in idx), an, numeric)
    err, name, idx, an, numeric = worst
    return GradCheckReport(
        max_rel_error=err,
        parameter=name,
        index=idx,
        analytic=an,
        numeric=numeric,
        n_checked=n_checked,
    )
