"""Exception types shared across the package.

Validation problems (bad parameters, malformed config) raise
ValidationError; everything that goes wrong *numerically* after valid
input derives from NumericalError so the CLI can map the two families
to distinct exit codes.
"""


class ValidationError(ValueError):
    """Invalid parameter or configuration value."""


class NumericalError(RuntimeError):
    """Base class for numerical failures after valid input."""


class BracketError(NumericalError):
    """Shooting bisection could not bracket the ground state."""

    def __init__(self, message, lo=None, hi=None):
        super().__init__(message)
        self.lo = lo
        self.hi = hi


class ConvergenceError(NumericalError):
    """An iterative solve ran out of iterations or stagnated."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class ContractionError(NumericalError):
    """Fixed-point correction stopped contracting."""

    def __init__(self, message, ratios=None):
        super().__init__(message)
        self.ratios = list(ratios) if ratios is not None else None
