"""Exception hierarchy shared by every solver entry point."""


class InvRobError(Exception):
    """Base class for all errors raised by invrob."""


class UsageError(InvRobError, ValueError):
    """Bad arguments: dimension mismatch, infeasible design point, bad index."""


class EvaluationError(InvRobError):
    """A problem function returned a non-finite value or raised."""

    def __init__(self, message, index=None, x=None, u=None):
        super().__init__(message)
        self.index = index
        self.x = x
        self.u = u


class ContractViolation(InvRobError):
    """A user-supplied callable broke its declared contract."""


class DomainError(InvRobError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class UnsupportedError(InvRobError):
    """Combination of options that is deliberately not implemented."""


class InfeasibleProblemError(InvRobError):
    """The nominal scenarios cannot be covered by any decision in the box."""

    def __init__(self, message, violation=None, x=None):
        super().__init__(message)
        self.violation = violation
        self.x = x


class NonConvergenceError(InvRobError):
    """The exchange loop ran out of rounds with a residual violation."""

    def __init__(self, message, best=None, violation=None):
        super().__init__(message)
        self.best = best
        self.violation = violation


class SpecError(InvRobError):
    """Malformed problem-spec file or expression."""
