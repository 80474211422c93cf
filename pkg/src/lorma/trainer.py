"""Desk-scale training of adapters on synthetic regression tasks.

The loss is always ``0.5 * ||prediction - y||_F^2 / n_columns`` over a
minibatch. Training is sequential and fully determined by the seed: data
order comes from a :class:`~lorma.rng.Xoshiro256` stream and every
arithmetic step is a fixed sequence of numpy operations.
"""

import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import linalg
from .adapters import delta_w, forward, transform_matrix
from .exceptions import ConfigurationError, DivergenceError
from .gradients import backward
from .rng import Xoshiro256, check_random_state

# ---------------------------------------------------------------------------
# optimizers
# ---------------------------------------------------------------------------


class OptimizerKind(str, Enum):
    SGD = "sgd"
    ADAMW = "adamw"


@dataclass(frozen=True)
class OptimizerSpec:
    kind: OptimizerKind = OptimizerKind.ADAMW
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", OptimizerKind(self.kind))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        for name in ("lr", "beta1", "beta2", "eps", "weight_decay"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.lr >= 0.0:
            raise ConfigurationError(f"lr must be non-negative, got {self.lr}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1), got {value}")
        if not self.eps > 0.0:
            raise ConfigurationError(f"eps must be positive, got {self.eps}")
        if not self.weight_decay >= 0.0:
            raise ConfigurationError(f"weight_decay must be >= 0, got {self.weight_decay}")

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "weight_decay": self.weight_decay,
        }


class SGD:
    def __init__(self, spec):
        self.spec = spec

    def step(self, params, grads, lr):
        wd = self.spec.weight_decay
        for name, p in params.items():
            if wd:
                p *= 1.0 - lr * wd
            p -= lr * grads[name]


class AdamW:
    """Adam with bias correction and decoupled weight decay.

    The decay shrinks the parameters directly (``p *= 1 - lr * wd``)
    instead of being folded into the gradient.
    """

    def __init__(self, spec):
        self.spec = spec
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params, grads, lr):
        spec = self.spec
        self.t += 1
        bc1 = 1.0 - spec.beta1**self.t
        bc2 = 1.0 - spec.beta2**self.t
        for name, p in params.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= spec.beta1
            m += (1.0 - spec.beta1) * g
            v *= spec.beta2
            v += (1.0 - spec.beta2) * (g * g)
            if spec.weight_decay:
                p *= 1.0 - lr * spec.weight_decay
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + spec.eps)


def make_optimizer(spec):
    if spec.kind is OptimizerKind.SGD:
        return SGD(spec)
    return AdamW(spec)


# ---------------------------------------------------------------------------
# learning-rate schedules
# ---------------------------------------------------------------------------


class ScheduleKind(str, Enum):
    CONSTANT = "constant"
    LINEAR_WARMUP_DECAY = "linear_warmup_decay"
    COSINE = "cosine"


@dataclass(frozen=True)
class LrSchedule:
    """Multiplier on the peak learning rate as a function of the step.

    ``total_steps=None`` means "fill in from the training loop".
    """

    kind: ScheduleKind = ScheduleKind.LINEAR_WARMUP_DECAY
    warmup_ratio: float = 0.06
    total_steps: int = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", ScheduleKind(self.kind))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        ratio = float(self.warmup_ratio)
        if not 0.0 <= ratio < 1.0:
            raise ConfigurationError(f"warmup_ratio must lie in [0, 1), got {ratio}")
        object.__setattr__(self, "warmup_ratio", ratio)
        if self.total_steps is not None:
            if int(self.total_steps) <= 0:
                raise ConfigurationError(f"total_steps must be positive, got {self.total_steps}")
            object.__setattr__(self, "total_steps", int(self.total_steps))

    @property
    def warmup_steps(self):
        return int(round(self.warmup_ratio * self._total()))

    def _total(self):
        if self.total_steps is None:
            raise ConfigurationError("schedule total_steps is not set")
        return self.total_steps

    def factor(self, step):
        total = self._total()
        if self.kind is ScheduleKind.CONSTANT:
            return 1.0
        warm = self.warmup_steps
        if step < warm:
            return step / warm
        if step >= total:
            return 0.0
        span = total - warm
        progress = (step - warm) / span
        if self.kind is ScheduleKind.LINEAR_WARMUP_DECAY:
            return max(0.0, 1.0 - progress)
        return 0.5 * (1.0 + math.cos(math.pi * progress))

    def lr(self, step, peak):
        return peak * self.factor(step)

    def with_total(self, total_steps):
        return LrSchedule(self.kind, self.warmup_ratio, total_steps)

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "warmup_ratio": self.warmup_ratio,
            "total_steps": self.total_steps,
        }


# ---------------------------------------------------------------------------
# synthetic tasks
# ---------------------------------------------------------------------------


class TaskKind(str, Enum):
    TARGET_RECOVERY = "target_recovery"
    TINY_ATTENTION = "tiny_attention"


class TargetKind(str, Enum):
    LOW_RANK_DELTA = "low_rank_delta"
    DENSE_RANDOM = "dense_random"
    PERMUTED_SCALED = "permuted_scaled"


@dataclass(frozen=True)
class TaskSpec:
    """Synthetic task description.

    ``target_rank`` is the rank of the additive delta for
    ``low_rank_delta`` and the size of the index set moved by the
    permutation and scaling for ``permuted_scaled``. ``seq_len`` only
    matters for ``tiny_attention``.
    """

    kind: TaskKind = TaskKind.TARGET_RECOVERY
    d: int = 32
    k: int = 32
    target_kind: TargetKind = TargetKind.LOW_RANK_DELTA
    target_rank: int = 2
    n_train: int = 256
    noise_std: float = 0.0
    seq_len: int = 4

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", TaskKind(self.kind))
            object.__setattr__(self, "target_kind", TargetKind(self.target_kind))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        for name in ("d", "k", "target_rank", "n_train", "seq_len"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value <= 0:
                raise ConfigurationError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.target_rank > min(self.d, self.k):
            raise ConfigurationError(
                f"target_rank {self.target_rank} exceeds min(d, k) = {min(self.d, self.k)}"
            )
        if self.target_kind is TargetKind.PERMUTED_SCALED and self.d != self.k:
            raise ConfigurationError("permuted_scaled targets need d == k")
        noise = float(self.noise_std)
        if not noise >= 0.0:
            raise ConfigurationError(f"noise_std must be >= 0, got {self.noise_std}")
        object.__setattr__(self, "noise_std", noise)

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "d": self.d,
            "k": self.k,
            "target_kind": self.target_kind.value,
            "target_rank": self.target_rank,
            "n_train": self.n_train,
            "noise_std": self.noise_std,
            "seq_len": self.seq_len,
        }


class Task:
    """Regression data ``y ~ W* x`` with a frozen starting weight ``w0``.

    Samples are columns of ``x`` (``k x n``) and ``y`` (``d x n``).
    """

    def __init__(self, spec, w0, w_target, x, y):
        self.spec = spec
        self.w0 = w0
        self.w_target = w_target
        self.x = x
        self.y = y

    @property
    def n_samples(self):
        return self.x.shape[1]

    def columns(self, idx):
        return idx

    def head(self, h, idx):
        return h

    def head_backward(self, h, idx, d_pred):
        return d_pred

    def batch(self, idx):
        cols = self.columns(idx)
        return self.x[:, cols], self.y[:, cols]

    def loss(self, state, idx=None):
        """Mean squared loss of ``state`` on the samples ``idx`` (all by default)."""
        if idx is None:
            idx = np.arange(self.n_samples)
        xb, yb = self.batch(idx)
        r = self.head(forward(state, xb), idx) - yb
        return 0.5 * float(np.sum(r * r)) / r.shape[1]


class AttentionTask(Task):
    """Single-head self-attention whose query projection is adapted.

    Each sample is a sequence of ``seq_len`` tokens stored as consecutive
    columns of ``x``. Keys and values come from frozen projections; the
    target uses ``W*`` as query projection.
    """

    def __init__(self, spec, w0, w_target, x, y, wk, wv):
        self.wk = wk
        self.wv = wv
        self.keys = wk @ x
        self.values = wv @ x
        super().__init__(spec, w0, w_target, x, y)

    @property
    def n_samples(self):
        return self.x.shape[1] // self.spec.seq_len

    def columns(self, idx):
        L = self.spec.seq_len
        return (np.asarray(idx)[:, None] * L + np.arange(L)[None, :]).ravel()

    def _split(self, m, n):
        # (rows, n*L) -> (n, L, rows)
        return m.T.reshape(n, self.spec.seq_len, m.shape[0])

    def _attend(self, q, idx):
        n = len(idx)
        cols = self.columns(idx)
        qs = self._split(q, n)
        ks = self._split(self.keys[:, cols], n)
        vs = self._split(self.values[:, cols], n)
        scores = np.einsum("nid,njd->nij", qs, ks) / math.sqrt(q.shape[0])
        scores -= scores.max(axis=2, keepdims=True)
        p = np.exp(scores)
        p /= p.sum(axis=2, keepdims=True)
        return p, ks, vs

    def head(self, h, idx):
        p, _, vs = self._attend(h, idx)
        out = np.einsum("nij,njd->nid", p, vs)
        return out.reshape(-1, out.shape[2]).T

    def head_backward(self, h, idx, d_pred):
        n = len(idx)
        p, ks, vs = self._attend(h, idx)
        d_out = self._split(d_pred, n)
        d_p = np.einsum("nid,njd->nij", d_out, vs)
        d_scores = p * (d_p - np.sum(d_p * p, axis=2, keepdims=True))
        d_q = np.einsum("nij,njd->nid", d_scores, ks) / math.sqrt(h.shape[0])
        return d_q.reshape(-1, d_q.shape[2]).T


def _full_rank_weight(rng, d, k):
    """Random ``d x k`` weight with singular values drawn from [0.5, 1.5].

    The rank check is kept as a rejection step even though the
    construction makes failure practically impossible.
    """
    p = min(d, k)
    for _ in range(100):
        u, _ = linalg.qr_decompose(rng.normal_matrix(d, p))
        v, _ = linalg.qr_decompose(rng.normal_matrix(k, p))
        sigma = np.array([0.5 + rng.uniform() for _ in range(p)])
        w = (u * sigma) @ v.T
        if linalg.numerical_rank(w) == p:
            return w
    raise ConfigurationError(f"could not draw a full-rank {d}x{k} weight")


def _target_weight(spec, w0, rng):
    d, k, t = spec.d, spec.k, spec.target_rank
    kind = spec.target_kind
    if kind is TargetKind.LOW_RANK_DELTA:
        u = rng.normal_matrix(d, t, 1.0 / math.sqrt(d))
        v = rng.normal_matrix(k, t, 1.0 / math.sqrt(k))
        return w0 + u @ v.T
    if kind is TargetKind.DENSE_RANDOM:
        return rng.normal_matrix(d, k, 1.0 / math.sqrt(k))
    # permuted_scaled: cycle and rescale a random subset of t rows, so the
    # multiplier P D is full rank while P D - I has rank <= t
    support = rng.permutation(d)[: max(t, 2)]
    perm = np.arange(d)
    perm[support] = np.roll(support, 1)
    diag = np.ones(d)
    diag[support] = [0.5 + rng.uniform() for _ in support]
    return (diag[:, None] * w0)[perm]


def make_task(spec, seed=0):
    """Draw a frozen weight, a hidden target and a training set.

    Everything is reproducible from ``(spec, seed)``.
    """
    if not isinstance(spec, TaskSpec):
        spec = TaskSpec(**spec)
    rng = check_random_state(seed)
    w0 = _full_rank_weight(rng, spec.d, spec.k)
    w_target = _target_weight(spec, w0, rng)
    if spec.kind is TaskKind.TARGET_RECOVERY:
        x = rng.normal_matrix(spec.k, spec.n_train)
        y = w_target @ x
        if spec.noise_std:
            y = y + rng.normal_matrix(spec.d, spec.n_train, spec.noise_std)
        return Task(spec, w0, w_target, x, y)
    n_cols = spec.n_train * spec.seq_len
    x = rng.normal_matrix(spec.k, n_cols)
    wk = rng.normal_matrix(spec.d, spec.k, 1.0 / math.sqrt(spec.k))
    wv = rng.normal_matrix(spec.d, spec.k, 1.0 / math.sqrt(spec.k))
    task = AttentionTask(spec, w0, w_target, x, np.zeros((spec.d, n_cols)), wk, wv)
    all_idx = np.arange(spec.n_train)
    y = task.head(w_target @ x, all_idx)
    if spec.noise_std:
        y = y + rng.normal_matrix(spec.d, n_cols, spec.noise_std)
    task.y = y
    return task


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainLog:
    step_losses: list = field(default_factory=list)
    epoch_rank_trace: list = field(default_factory=list)
    epoch_delta_rank: list = field(default_factory=list)
    wall_seconds: float = 0.0
    final_loss: float = float("nan")

    def loss_rows(self):
        return [(i, float(v)) for i, v in enumerate(self.step_losses)]

    def rank_rows(self):
        return [
            (i, r, dr)
            for i, (r, dr) in enumerate(zip(self.epoch_rank_trace, self.epoch_delta_rank))
        ]


def train(state, task, opt, sched=None, epochs=1, batch=16, seed=0, track_rank=True):
    """Train the factors of ``state`` on ``task``.

    Returns ``(trained_state, log)``; the input state is not modified and
    ``w0`` is never touched. The schedule's ``total_steps`` is filled in
    from ``epochs`` and the number of minibatches per epoch when unset.
    With ``track_rank`` the rank of the multiplier and of ``delta_w`` is
    recorded after every epoch.

    Raises :class:`DivergenceError` as soon as a loss is non-finite.
    """
    if task.w0.shape != state.w0.shape:
        raise ConfigurationError(
            f"task weight {task.w0.shape} does not match adapter weight {state.w0.shape}"
        )
    if epochs <= 0 or batch <= 0:
        raise ConfigurationError("epochs and batch must be positive")
    sched = LrSchedule(ScheduleKind.CONSTANT, 0.0) if sched is None else sched
    n = task.n_samples
    steps_per_epoch = -(-n // batch)
    if sched.total_steps is None:
        sched = sched.with_total(epochs * steps_per_epoch)
    rng = Xoshiro256(seed) if not isinstance(seed, Xoshiro256) else seed
    optimizer = make_optimizer(opt)

    work = state.copy()
    params = {"b": work.b, "a": work.a}
    log = TrainLog()
    start = time.perf_counter()
    step = 0
    for _epoch in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch):
            idx = order[lo:lo + batch]
            xb, yb = task.batch(idx)
            h = forward(work, xb)
            resid = task.head(h, idx) - yb
            ncols = resid.shape[1]
            loss = 0.5 * float(np.sum(resid * resid)) / ncols
            if not math.isfinite(loss):
                raise DivergenceError(step, loss)
            log.step_losses.append(loss)
            upstream = task.head_backward(h, idx, resid / ncols)
            grads = backward(work, xb, upstream)
            optimizer.step(params, {"b": grads.d_b, "a": grads.d_a}, sched.lr(step, opt.lr))
            step += 1
        if track_rank:
            with np.errstate(over="ignore", invalid="ignore"):
                mult, dw = transform_matrix(work), delta_w(work)
            # finite factors can still overflow in their product
            if not (np.all(np.isfinite(mult)) and np.all(np.isfinite(dw))):
                raise DivergenceError(step, float("nan"))
            log.epoch_rank_trace.append(linalg.numerical_rank(mult))
            log.epoch_delta_rank.append(linalg.numerical_rank(dw))
    with np.errstate(over="ignore", invalid="ignore"):
        final = task.loss(work)
    if not math.isfinite(final):
        raise DivergenceError(step, final)
    log.final_loss = final
    log.wall_seconds = time.perf_counter() - start
    return work, log


def loss_auc(log):
    """Trapezoidal area under the step-loss curve divided by its length.

    A constant curve ``c`` gives ``c``; a straight line from 1 to 0 gives
    0.5.
    """
    losses = np.asarray(log.step_losses if isinstance(log, TrainLog) else log, dtype=np.float64)
    if losses.size < 2:
        raise ValueError(f"loss AUC needs at least 2 steps, got {losses.size}")
    area = 0.5 * float(np.sum(losses[1:] + losses[:-1]))
    return area / (losses.size - 1)


def auc_reduction(auc_test, auc_ref):
    """Percentage decrease of ``auc_test`` relative to ``auc_ref``."""
    return (1.0 - auc_test / auc_ref) * 100.0
