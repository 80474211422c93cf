"""Exception hierarchy shared by every module of the package."""


class LormaError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(LormaError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class NumericalFailureError(LormaError, ArithmeticError):
    """An iterative routine did not converge within its iteration cap."""


class RankDeficiencyError(LormaError, ValueError):
    """A matrix does not have the rank an operation requires."""

    def __init__(self, message, observed_rank=None, required_rank=None):
        super().__init__(message)
        self.observed_rank = observed_rank
        self.required_rank = required_rank


class ConfigurationError(LormaError, ValueError):
    """Invalid adapter, task, optimizer or experiment configuration."""


class DivergenceError(LormaError, FloatingPointError):
    """Training produced a non-finite loss."""

    def __init__(self, step, loss):
        super().__init__(f"loss became non-finite ({loss!r}) at step {step}")
        self.step = step
        self.loss = loss


class UndefinedMetricError(LormaError, ValueError):
    """A comparison metric is undefined for the given inputs."""


class SnapshotFormatError(LormaError, ValueError):
    """A binary matrix snapshot could not be decoded."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
