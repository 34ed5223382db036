"""Exception types shared across the package."""


class GeoPrivError(Exception):
    """Base class for all geopriv errors."""


class OutOfProjectionWindow(GeoPrivError):
    """Point is too far from the projection origin for the flat-map approximation."""


class OutOfGrid(GeoPrivError):
    """Point lies outside the grid bounding box."""


class IndexOutOfRange(GeoPrivError, IndexError):
    """Cell index does not address any cell of the grid."""


class DomainError(GeoPrivError, ValueError):
    """Argument outside the mathematical domain of a function."""


class InvalidUtility(GeoPrivError, ValueError):
    """Average-loss target must be strictly positive and finite."""


class DegeneratePrior(GeoPrivError):
    """All posterior mass underflowed; callers fall back to the unremapped location."""


class SupportMismatch(GeoPrivError, ValueError):
    """Distributions compared on different supports."""


class BothZero(GeoPrivError, ValueError):
    """Both conditional densities are zero: the observation is impossible."""


class ZeroEvidence(GeoPrivError):
    """Observation has zero probability under the prior."""


class EmptyPrior(GeoPrivError):
    """No check-in landed inside the grid."""


class GridMismatch(GeoPrivError, ValueError):
    """Trial batches do not cover the same (distance, average-loss) grid."""
