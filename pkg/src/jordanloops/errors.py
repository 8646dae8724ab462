"""Exception hierarchy shared by all modules."""


class JordanLoopsError(Exception):
    """Base class for domain errors raised by this package."""


class InvalidArgument(JordanLoopsError, ValueError):
    """An argument is outside the domain of the operation."""


class NumericalFailure(JordanLoopsError, ArithmeticError):
    """A numerical step did not meet its accuracy contract."""

    def __init__(self, message: str, worst: float | None = None):
        super().__init__(message)
        self.worst = worst


class DegenerateMeasurement(NumericalFailure):
    """A normalization or loop-product denominator fell below its floor."""


class LimitFailure(NumericalFailure):
    """A limiting sequence did not converge."""
