"""Exception types raised across the package."""


class StabError(Exception):
    """Base class for all package errors."""


class NotPositiveDefinite(StabError, ValueError):
    pass


class NoConvergence(StabError, RuntimeError):
    pass


class BadDimension(StabError, ValueError):
    pass


class DimensionMismatch(StabError, ValueError):
    pass


class BadMode(StabError, ValueError):
    pass


class DegenerateState(StabError, ValueError):
    """Raised when no usable (non-zero) state remains after normalization."""


class DegenerateData(StabError, ValueError):
    pass


class InfeasibleAtInit(StabError, RuntimeError):
    """The initial rate handed to a bisection is not certifiably feasible."""


class OutOfRange(StabError, ValueError):
    pass


class NoSolution(StabError, ValueError):
    """No epsilon in (0, 1) reaches the requested confidence level.

    ``min_beta`` carries the smallest violation level attainable with the
    given sample count (the infimum over epsilon).
    """

    def __init__(self, message, min_beta=None):
        super().__init__(message)
        self.min_beta = min_beta


class BudgetExceeded(StabError, RuntimeError):
    pass


class EngineSizeCap(StabError, ValueError):
    pass
