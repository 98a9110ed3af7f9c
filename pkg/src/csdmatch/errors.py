"""Exception hierarchy shared across the package."""


class MatchingError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(MatchingError):
    """Invalid parameters or an infeasible problem configuration."""


class ParseError(MatchingError):
    """A network file could not be parsed; the message names the offending line."""


class ValidationError(MatchingError):
    """Parsed or constructed data violates a structural invariant."""


class InfeasibleError(MatchingError):
    """The optimization problem has no feasible point."""


class ConvergenceError(MatchingError):
    """An iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
