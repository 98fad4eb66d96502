"""Exception hierarchy.

Every error carries a short ``kind`` string so that reports and the command
line can name the failure without depending on class names.
"""
from __future__ import annotations


class SimplexOTError(Exception):
    kind = "error"


class InvalidDimension(SimplexOTError, ValueError):
    kind = "invalid-dimension"


class ShapeError(SimplexOTError, ValueError):
    kind = "shape-error"


class NotOnBoundary(SimplexOTError, ValueError):
    kind = "not-on-boundary"


class OutOfChart(SimplexOTError, ValueError):
    kind = "out-of-chart"


class NotInImage(SimplexOTError, ValueError):
    kind = "not-in-image"


class NonSymmetricSupport(SimplexOTError, ValueError):
    kind = "non-symmetric-support"


class NoSamples(SimplexOTError, ValueError):
    kind = "no-samples"


class ChartSideMismatch(SimplexOTError, ValueError):
    kind = "chart-side-mismatch"


class NonsmoothPoint(SimplexOTError, ArithmeticError):
    kind = "nonsmooth-point"


class InvalidDensity(SimplexOTError, ValueError):
    kind = "invalid-density"


class TooLarge(SimplexOTError, ValueError):
    kind = "too-large"


class MarginalMismatch(SimplexOTError, ValueError):
    kind = "marginal-mismatch"


class NotCConvex(SimplexOTError, ValueError):
    """A potential lies strictly above its double c-transform at some sample."""

    kind = "not-c-convex"


class InternalError(SimplexOTError, RuntimeError):
    kind = "internal-error"


class BoundaryTooClose(SimplexOTError, ValueError):
    kind = "boundary-too-close"


class InsufficientResolution(SimplexOTError, ValueError):
    kind = "insufficient-resolution"


class ValidationError(SimplexOTError, ValueError):
    """A violated precondition of the step-function construction."""

    kind = "validation-error"


class DomainError(SimplexOTError, ValueError):
    kind = "domain-error"


class ConfigError(SimplexOTError, ValueError):
    kind = "config-error"

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
