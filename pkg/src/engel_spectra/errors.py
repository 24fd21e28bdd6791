"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class ConvergenceError(RuntimeError):
    """A numerical tolerance could not be reached.

    ``achieved`` carries the best error estimate (or interval) obtained.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class TruncationError(ConvergenceError):
    """The computational domain is too small for the requested states."""


class ResolutionError(ConvergenceError):
    """A quadrature grid does not resolve the oscillations of its integrand."""


class AccuracyError(ConvergenceError):
    """A consistency residual that should vanish exceeds its tolerance."""
