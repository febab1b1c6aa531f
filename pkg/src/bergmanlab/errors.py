"""Exception types shared across the package."""


class BergmanLabError(Exception):
    """Base class for package errors."""


class DomainError(BergmanLabError, ValueError):
    """An argument left the mathematical domain of an operation."""


class WeightSpecError(BergmanLabError, ValueError):
    """A weight specification string could not be parsed."""


class ConvergenceError(BergmanLabError, RuntimeError):
    """An iterative or adaptive routine exhausted its budget.

    Carries the best estimate reached and the tolerance actually achieved,
    so callers can decide whether the partial result is still usable.
    """

    def __init__(self, message, best=None, achieved=None):
        super().__init__(message)
        self.best = best
        self.achieved = achieved
