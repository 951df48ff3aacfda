"""Exception hierarchy for the wbary package."""


class WbaryError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(WbaryError, ValueError):
    """Invalid input data (shapes, weights, exponents, masses)."""


class ConvergenceError(WbaryError, RuntimeError):
    """An iterative solve failed to reach the requested tolerance.

    Carries the best iterate found so that callers can inspect it.
    """

    def __init__(self, message, best=None, residual=None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class SingularBlockError(WbaryError, ValueError):
    """A curvature block is singular/undefined (p < 2 at a coincident point)."""


class SingularPointError(WbaryError, ValueError):
    """Evaluation requested at an excluded singular point of a map."""


class GeometryError(WbaryError, ValueError):
    """A support-geometry quantity degenerates (zero separation/margin)."""


class StructureError(WbaryError, ValueError):
    """A family of affine maps violates the structured-class hypotheses."""


class InsufficientDataError(WbaryError, RuntimeError):
    """Too few usable samples to produce the requested estimate."""
