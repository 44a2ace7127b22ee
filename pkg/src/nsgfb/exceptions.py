"""Exception hierarchy for nsgfb."""


class NSGFBError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(NSGFBError, ValueError):
    pass


class InvariantViolation(NSGFBError, ValueError):
    pass


class RetriesExhausted(NSGFBError, RuntimeError):
    pass


class DimensionMismatch(NSGFBError, ValueError):
    pass


class BudgetExceeded(NSGFBError, MemoryError):
    pass


class ConvergenceFailure(NSGFBError, RuntimeError):
    pass


class NotPositiveDefinite(NSGFBError, ValueError):
    pass


class CommonRoot(NSGFBError, ValueError):
    """The two analysis polynomials share a root, so no Bezout pair exists."""


class Degenerate(NSGFBError, ValueError):
    pass


class KappaOne(NSGFBError, ValueError):
    """Condition number is exactly one; decay machinery is vacuous."""


class LocalSingular(NSGFBError, ArithmeticError):
    pass


class Diverged(NSGFBError, RuntimeError):
    """Raised when the distributed iteration blows up.

    The partial trace is attached as ``trace`` so callers can still inspect it.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class BoundViolated(NSGFBError, AssertionError):
    pass


class MissingLabels(NSGFBError, ValueError):
    pass


class MissingCoordinates(NSGFBError, ValueError):
    pass


class ZeroReference(NSGFBError, ZeroDivisionError):
    pass
