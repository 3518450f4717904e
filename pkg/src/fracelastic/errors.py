"""Exception hierarchy.

Validation problems (bad input) and numerical diagnostics (the computation
ran but cannot vouch for its answer) are kept apart so the CLI can map them
onto distinct exit codes.
"""


class FracElasticError(Exception):
    """Base class for all package errors."""


class ValidationError(FracElasticError, ValueError):
    """Input violates a documented invariant."""


class NumericalDiagnostic(FracElasticError, ArithmeticError):
    """A numerical procedure could not certify its result."""


class DegenerateNormalizationError(NumericalDiagnostic):
    """The hyper-singular normalization constant is zero or infinite."""


class ConvergenceError(NumericalDiagnostic):
    """Successive refinements disagree beyond the requested tolerance."""

    def __init__(self, message, *, estimate=None, remainder=None, where=None):
        super().__init__(message)
        self.estimate = estimate
        self.remainder = remainder
        self.where = where


class StabilityError(NumericalDiagnostic):
    """Time step or sign combination yields unstable dynamics."""


class SingularSystemError(NumericalDiagnostic):
    """A static problem has no unique solution under the chosen gauge."""
