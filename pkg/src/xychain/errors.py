"""Exception hierarchy shared by all xychain modules.

Each exception carries an ``exit_code`` used by the command-line front end.
"""


class XYChainError(Exception):
    """Base class for library errors."""

    exit_code = 3


class DomainError(XYChainError, ValueError):
    """Inputs outside the domain where a formula or operation is defined."""


class OddLengthNegativeCoupling(DomainError):
    """Raised when canonicalizing an odd-length chain with J < 0."""


class CapacityError(XYChainError):
    """Requested problem size exceeds a memory guard."""


class GaplessMode(DomainError):
    """A single-particle mode has zero energy, so its angle is undefined."""

    def __init__(self, k, message=None):
        self.k = k
        super().__init__(message or f"gapless mode at k={k}")


class SingularPoint(DomainError):
    """Geometry requested at a point with a gapless mode."""

    def __init__(self, k, message=None):
        self.k = k
        super().__init__(message or f"gapless mode at k={k}; metric is singular")


class StencilCrossesSingularLine(SingularPoint):
    """A finite-difference stencil point is gapless or too close to a critical line."""


class DegenerateMetric(DomainError):
    """det g is below the degeneracy threshold."""


class NoConvergence(XYChainError):
    """An iterative eigensolver exhausted its sweep budget."""


class Unclassifiable(XYChainError):
    """No case table matches the computed spectra within tolerance."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class InsufficientData(XYChainError):
    """Too few valid samples for a fit."""


class BranchMisfit(XYChainError):
    """A branch of a bi-exponential fit has R^2 below threshold."""

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)


class IoError(XYChainError, OSError):
    """Reading or writing an output file failed."""

    exit_code = 4
