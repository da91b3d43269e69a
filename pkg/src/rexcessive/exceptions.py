"""Exception hierarchy shared by all modules."""


class RexcessiveError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(RexcessiveError, ValueError):
    """A diffusion or run configuration is malformed."""


class QuadratureError(RexcessiveError, ArithmeticError):
    """A coefficient integral could not be evaluated.

    ``interval`` holds the offending subinterval when known.
    """

    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class InconclusiveError(RexcessiveError):
    """A numerical decision could not be made within the configured budget.

    ``evidence`` carries whatever partial diagnostics were computed, so that
    callers can report them instead of guessing.
    """

    def __init__(self, message, evidence=None):
        super().__init__(message)
        self.evidence = evidence


class SolverError(RexcessiveError, ArithmeticError):
    """The excessive-function solver failed (non-convergence or overflow)."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class SimulationError(RexcessiveError):
    """A Monte Carlo run was rejected."""
