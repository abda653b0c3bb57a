"""Exception types shared across the package."""


class GeobouquetError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(GeobouquetError, ValueError):
    """An input lies outside the domain where an operation is defined."""


class RankAmbiguous(GeobouquetError):
    """Singular values straddle the nullspace cut without a clean gap."""

    def __init__(self, message, gap_ratio=None, singular_values=None):
        super().__init__(message)
        self.gap_ratio = gap_ratio
        self.singular_values = singular_values


class NotCompact(GeobouquetError):
    """The polytope has a nontrivial recession cone."""


class SingularHit(GeobouquetError):
    """A billiard ray meets the codimension-2 skeleton (or an exact tie)."""


class Escape(GeobouquetError):
    """A billiard ray has no forward intersection with any face."""


class NotABilliard(GeobouquetError):
    """A polygonal path fails the billiard axioms; carries the report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotInvariant(GeobouquetError):
    """The tangent plane of a loop is not invariant under its transport."""


class DegenerateGeometry(GeobouquetError):
    """A construction produced a collision outside an open face."""


class ConstructionFailed(GeobouquetError):
    """No parameter in the search schedule passed every check."""


class NoConvergence(GeobouquetError):
    """An iteration hit its cap before reaching tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class EscapedDisks(GeobouquetError):
    """A chain vertex left its constraint disk during refinement."""


class SingularPoint(GeobouquetError):
    """The gradient vanishes where a regular point is required."""


class NotRegular(GeobouquetError):
    """A level set crosses a grid cell with near-zero gradient."""
