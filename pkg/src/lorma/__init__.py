"""Low-rank additive (LoRA) and multiplicative (LoRMA) weight adapters."""

__version__ = "0.1.0"

from .adapters import (
    AdapterConfig,
    AdapterState,
    AdapterVariant,
    MultiplySide,
    delta_w,
    effective_weight,
    forward,
    init_adapter,
    merge,
)
from .analysis import (
    MetricsReport,
    compare_updates,
    flattened_cosine,
    frobenius_distance,
    principal_angle_theta1,
    top_r_eigen_ssd,
    top_r_singular_ssd,
)
from .estimator import LowRankAdapterRegressor
from .gradients import GradientBundle, backward, grad_check
from .inflation import InflationKind, deflate_pi, inflate_pi, inflate_plus
from .linalg import (
    FlopCounter,
    SvdResult,
    eigenvalues,
    left_pseudo_inverse,
    matmul,
    numerical_rank,
    qr_decompose,
    svd,
)
from .theory import (
    ExistenceCertificate,
    best_postmultiplier,
    construct_premultiplier,
    square_both_sides,
)
from .trainer import (
    LrSchedule,
    OptimizerSpec,
    TaskSpec,
    TrainLog,
    loss_auc,
    make_task,
    train,
)

__all__ = [
    "AdapterConfig", "AdapterState", "AdapterVariant", "MultiplySide",
    "delta_w", "effective_weight", "forward", "init_adapter", "merge",
    "MetricsReport", "compare_updates", "flattened_cosine", "frobenius_distance",
    "principal_angle_theta1", "top_r_eigen_ssd", "top_r_singular_ssd",
    "LowRankAdapterRegressor",
    "GradientBundle", "backward", "grad_check",
    "InflationKind", "deflate_pi", "inflate_pi", "inflate_plus",
    "FlopCounter", "SvdResult", "eigenvalues", "left_pseudo_inverse", "matmul",
    "numerical_rank", "qr_decompose", "svd",
    "ExistenceCertificate", "best_postmultiplier", "construct_premultiplier",
    "square_both_sides",
    "LrSchedule", "OptimizerSpec", "TaskSpec", "TrainLog", "loss_auc", "make_task", "train",
]
