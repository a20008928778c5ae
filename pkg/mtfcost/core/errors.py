"""Exception hierarchy shared by the numerical engine."""

from typing import Optional


class MtfError(Exception):
    pass


class InvalidArgumentError(MtfError, ValueError):
    pass


class OutOfRangeError(MtfError, ValueError):
    pass


class EvaluationError(MtfError, ArithmeticError):
    pass


class ToleranceNotMetError(MtfError):
    """Raised when an adaptive routine exhausts its budget; keeps the best estimate it reached."""

    def __init__(self, message: str, best_estimate: float, error_estimate: Optional[float] = None):
        super().__init__(message)
        self.best_estimate = best_estimate
        self.error_estimate = error_estimate


class DegenerateLawError(MtfError):
    pass


class InvalidDensityError(MtfError, ValueError):
    pass


class SizeError(MtfError):
    pass


class ConstructionError(MtfError):
    pass


class ValidationFailedError(MtfError):
    pass
