"""scikit-learn compatible wrapper around adapter training.

:class:`LowRankAdapterRegressor` learns a linear map ``y ~ W x`` by
adapting a frozen ``base_weight`` with one of the adapter variants. It
follows the row-sample convention of scikit-learn: ``X`` is
``(n_samples, n_features)`` and ``y`` is ``(n_samples, n_targets)``,
with ``base_weight`` of shape ``(n_targets, n_features)``.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .adapters import AdapterConfig, delta_w, effective_weight, forward, init_adapter, merge
from .trainer import LrSchedule, OptimizerSpec, Task, TaskSpec, train
from .validation import check_matrix


class LowRankAdapterRegressor(RegressorMixin, BaseEstimator):
    """Fit a low-rank additive or multiplicative adapter on a frozen weight.

    Parameters
    ----------
    base_weight : array of shape (n_targets, n_features)
        Frozen weight ``W0``; never modified.
    variant : {"lora", "lorma_naive", "lorma_pi", "lorma_plus"}
    side : {"pre", "post"}
        Multiplication side for the multiplicative variants.
    rank : int
    alpha : float or None
        Scaling numerator; ``None`` means ``alpha = rank``.
    optimizer : {"adamw", "sgd"}
    learning_rate, weight_decay : float
    schedule : {"linear_warmup_decay", "cosine", "constant"}
    warmup_ratio : float
    epochs, batch_size : int
    random_state : int or None

    Attributes
    ----------
    adapter_ : AdapterState
    train_log_ : TrainLog
    coef_ : ndarray of shape (n_targets, n_features)
        Merged weight.
    n_features_in_ : int
    """

    def __init__(
        self,
        base_weight=None,
        variant="lorma_plus",
        side="pre",
        rank=4,
        alpha=None,
        optimizer="adamw",
        learning_rate=1e-3,
        weight_decay=0.0,
        schedule="linear_warmup_decay",
        warmup_ratio=0.06,
        epochs=125,
        batch_size=16,
        random_state=None,
    ):
        self.base_weight = base_weight
        self.variant = variant
        self.side = side
        self.rank = rank
        self.alpha = alpha
        self.optimizer = optimizer
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.schedule = schedule
        self.warmup_ratio = warmup_ratio
        self.epochs = epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def _adapter_config(self):
        seed = 0 if self.random_state is None else int(self.random_state)
        alpha = float(self.rank) if self.alpha is None else self.alpha
        return AdapterConfig(self.variant, self.side, self.rank, alpha, seed)

    def fit(self, X, y):
        if self.base_weight is None:
            raise ValueError("base_weight must be provided")
        w0 = check_matrix(self.base_weight, "base_weight")
        X = check_matrix(X, "X")
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        y = check_matrix(y, "y")
        if X.shape[1] != w0.shape[1]:
            raise ValueError(
                f"X has {X.shape[1]} features, base_weight expects {w0.shape[1]}"
            )
        if y.shape != (X.shape[0], w0.shape[0]):
            raise ValueError(f"y must have shape {(X.shape[0], w0.shape[0])}, got {y.shape}")
        d, k = w0.shape
        spec = TaskSpec(d=d, k=k, target_rank=1, n_train=X.shape[0])
        task = Task(spec, w0, None, X.T.copy(), y.T.copy())
        state = init_adapter(w0, self._adapter_config())
        opt = OptimizerSpec(self.optimizer, self.learning_rate, weight_decay=self.weight_decay)
        sched = LrSchedule(self.schedule, self.warmup_ratio)
        seed = 0 if self.random_state is None else int(self.random_state)
        self.adapter_, self.train_log_ = train(
            state, task, opt, sched, self.epochs, self.batch_size, seed=seed
        )
        self.coef_ = effective_weight(self.adapter_)
        self.n_features_in_ = k
        return self

    def predict(self, X):
        check_is_fitted(self, "adapter_")
        X = check_matrix(X, "X")
        out = forward(self.adapter_, X.T).T
        return out[:, 0] if out.shape[1] == 1 else out

    def merge(self):
        """Merged weight and whether the base weight can be recovered."""
        check_is_fitted(self, "adapter_")
        return merge(self.adapter_)

    @property
    def delta_w_(self):
        check_is_fitted(self, "adapter_")
        return delta_w(self.adapter_)
