"""Low-rank adapters around a frozen weight matrix.

Four variants share one state layout (frozen ``w0`` plus trainable ``b``
and ``a``):

``lora``
    additive update, ``h = W0 x + s B A x``
``lorma_naive``
    multiplicative update without inflation, ``h = B A W0 x``
``lorma_pi``
    ``h = I_pi(s B A) W0 x`` with permutation inflation
``lorma_plus``
    ``h = (s B A + I) W0 x`` with additive inflation

Multiplicative variants can also post-multiply (``h = W0 T x``). Here
``s = alpha / r``; the naive variant applies no scaling.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import linalg
from .exceptions import ConfigurationError, ShapeError
from .inflation import InflationKind, inflate_pi
from .rng import check_random_state
from .validation import check_matrix

logger = logging.getLogger(__name__)

INIT_STD = 0.02


class AdapterVariant(str, Enum):
    LORA = "lora"
    LORMA_NAIVE = "lorma_naive"
    LORMA_PI = "lorma_pi"
    LORMA_PLUS = "lorma_plus"

    @property
    def multiplicative(self):
        return self is not AdapterVariant.LORA

    @property
    def inflation(self):
        return {
            AdapterVariant.LORMA_PI: InflationKind.PERMUTATION,
            AdapterVariant.LORMA_PLUS: InflationKind.ADDITIVE,
        }.get(self, InflationKind.NONE)


class MultiplySide(str, Enum):
    PRE = "pre"
    POST = "post"


@dataclass(frozen=True)
class AdapterConfig:
    variant: AdapterVariant = AdapterVariant.LORMA_PLUS
    side: MultiplySide = MultiplySide.PRE
    r: int = 4
    alpha: float = 4.0
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "variant", AdapterVariant(self.variant))
            object.__setattr__(self, "side", MultiplySide(self.side))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        if isinstance(self.r, bool) or not isinstance(self.r, (int, np.integer)) or self.r <= 0:
            raise ConfigurationError(f"r must be a positive integer, got {self.r!r}")
        object.__setattr__(self, "r", int(self.r))
        alpha = float(self.alpha)
        if not np.isfinite(alpha) or alpha <= 0.0:
            raise ConfigurationError(f"alpha must be positive and finite, got {self.alpha!r}")
        object.__setattr__(self, "alpha", alpha)
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def scaling(self):
        return self.alpha / self.r

    def to_dict(self):
        return {
            "variant": self.variant.value,
            "side": self.side.value,
            "r": self.r,
            "alpha": self.alpha,
            "seed": self.seed,
        }


def factor_shapes(config, d, k):
    """Shapes of ``(b, a)`` for a ``d x k`` frozen weight."""
    r = config.r
    if not config.variant.multiplicative:
        return (d, r), (r, k)
    if config.side is MultiplySide.PRE:
        return (d, r), (r, d)
    return (k, r), (r, k)


@dataclass
class AdapterState:
    """Frozen base weight plus trainable low-rank factors."""

    w0: np.ndarray
    b: np.ndarray
    a: np.ndarray
    config: AdapterConfig = field(default_factory=AdapterConfig)

    def __post_init__(self):
        self.w0 = check_matrix(self.w0, "w0")
        self.b = check_matrix(self.b, "b")
        self.a = check_matrix(self.a, "a")
        d, k = self.w0.shape
        b_shape, a_shape = factor_shapes(self.config, d, k)
        if self.b.shape != b_shape or self.a.shape != a_shape:
            raise ShapeError(
                f"{self.config.variant.value}/{self.config.side.value} adapter on a "
                f"{d}x{k} weight needs b{b_shape} and a{a_shape}, "
                f"got b{self.b.shape} and a{self.a.shape}"
            )

    @property
    def variant(self):
        return self.config.variant

    @property
    def side(self):
        return self.config.side

    @property
    def scaling(self):
        return self.config.scaling

    @property
    def shape(self):
        return self.w0.shape

    def copy(self):
        return replace(self, w0=self.w0.copy(), b=self.b.copy(), a=self.a.copy())

    def with_factors(self, b, a):
        return replace(self, b=b, a=a)


def init_adapter(w0, config):
    """Initialize trainable factors for ``w0``.

    ``lora`` and ``lorma_plus`` zero ``b``; ``lorma_pi`` puts ``1/s`` in the
    first column of ``b`` and ``e_1`` in the first row of ``a`` so that the
    inflated scaled product starts at the identity. ``lorma_naive`` has no
    identity start and draws both factors from a small Gaussian.
    """
    w0 = check_matrix(w0, "w0")
    if not isinstance(config, AdapterConfig):
        config = AdapterConfig(**config)
    d, k = w0.shape
    if config.r > min(d, k):
        raise ConfigurationError(f"rank r={config.r} exceeds min(d, k)={min(d, k)}")
    variant = config.variant
    if variant is AdapterVariant.LORA and config.side is MultiplySide.POST:
        logger.warning("side='post' has no effect on the additive lora variant")
    (br, bc), (ar, ac) = factor_shapes(config, d, k)
    rng = check_random_state(config.seed)
    s = config.scaling
    if variant is AdapterVariant.LORA:
        bound = 1.0 / np.sqrt(k)
        a = rng.uniform_matrix(ar, ac, -bound, bound)
        b = np.zeros((br, bc))
    elif variant is AdapterVariant.LORMA_PLUS:
        a = rng.normal_matrix(ar, ac, INIT_STD)
        b = np.zeros((br, bc))
    elif variant is AdapterVariant.LORMA_PI:
        b = rng.normal_matrix(br, bc, INIT_STD)
        b[:, 0] = 1.0 / s
        a = np.zeros((ar, ac))
        a[0, 0] = 1.0
    else:
        b = rng.normal_matrix(br, bc, INIT_STD)
        a = rng.normal_matrix(ar, ac, INIT_STD)
    return AdapterState(w0=w0.copy(), b=b, a=a, config=config)


def transform_matrix(state, counter=None):
    """The (inflated) square multiplier ``I(s B A)``.

    For ``lora`` this is the scaled additive update ``s B A`` and for
    ``lorma_naive`` the raw product ``B A``.
    """
    ba = linalg.matmul(state.b, state.a, counter)
    variant = state.variant
    if variant is AdapterVariant.LORMA_NAIVE:
        return ba
    scaled = linalg.scale(ba, state.scaling, counter)
    if variant is AdapterVariant.LORMA_PI:
        return inflate_pi(scaled)
    if variant is AdapterVariant.LORMA_PLUS:
        if counter is not None:
            counter.add_elementwise(scaled.shape[0])
        return scaled + np.eye(scaled.shape[0])
    return scaled


def _check_input(state, x):
    x = check_matrix(x, "x")
    if x.shape[0] != state.w0.shape[1]:
        raise ShapeError(
            f"x must have {state.w0.shape[1]} rows to match w0 {state.w0.shape}, "
            f"got {x.shape}"
        )
    return x


def forward(state, x, counter=None):
    """Adapter output for a batch of column inputs ``x`` (``k x batch``).

    The grouping of products is fixed per variant so that no ``d x k``
    merged weight is formed during the pass (the ``lorma_pi`` variant
    forms only the ``d x d`` inflated multiplier).
    """
    x = _check_input(state, x)
    w0, b, a, s = state.w0, state.b, state.a, state.scaling
    mm = linalg.matmul
    variant = state.variant
    if variant is AdapterVariant.LORA:
        u = mm(w0, x, counter)
        low = linalg.scale(mm(a, x, counter), s, counter)
        return linalg.add(u, mm(b, low, counter), counter)

    pre = state.side is MultiplySide.PRE
    inner = mm(w0, x, counter) if pre else x
    if variant is AdapterVariant.LORMA_NAIVE:
        out = mm(b, mm(a, inner, counter), counter)
    elif variant is AdapterVariant.LORMA_PLUS:
        low = linalg.scale(mm(a, inner, counter), s, counter)
        out = linalg.add(inner, mm(b, low, counter), counter)
    else:
        out = mm(transform_matrix(state, counter), inner, counter)
    return out if pre else mm(w0, out, counter)


def effective_weight(state):
    """Merged ``d x k`` weight equivalent to :func:`forward`."""
    w0 = state.w0
    t = transform_matrix(state)
    if state.variant is AdapterVariant.LORA:
        return w0 + t
    if state.side is MultiplySide.PRE:
        return t @ w0
    return w0 @ t


def delta_w(state):
    return effective_weight(state) - state.w0


@dataclass(frozen=True)
class MergeResult:
    """Merged weight plus whether the original can be recovered from it.

    For multiplicative variants recovery needs the multiplier to be
    invertible; the additive update can always be subtracted back out.
    """

    weight: np.ndarray
    invertible: bool
    multiplier_rank: int


def merge(state):
    weight = effective_weight(state)
    if state.variant is AdapterVariant.LORA:
        return MergeResult(weight=weight, invertible=True, multiplier_rank=-1)
    t = transform_matrix(state)
    rank = linalg.numerical_rank(t)
    return MergeResult(weight=weight, invertible=rank == t.shape[0], multiplier_rank=rank)


def perturb(state, std=0.1, seed=0):
    """Copy of ``state`` with Gaussian noise added to both factors.

    Used to obtain generic, non-initial states for checks that must not
    rely on the structure of the initialization.
    """
    rng = check_random_state(seed)
    b = state.b + rng.normal_matrix(*state.b.shape, std=std)
    a = state.a + rng.normal_matrix(*state.a.shape, std=std)
    return replace(state, w0=state.w0.copy(), b=b, a=a)
