"""Exception types shared across the package."""


class GeosparError(Exception):
    """Base class for all library errors."""


class EmptyInput(GeosparError):
    """Fewer points than the operation requires."""


class DuplicatePoint(GeosparError):
    """Two points coincide where distinctness is required."""


class UnknownPoint(GeosparError):
    """Referenced point id is not present."""


class PointOutOfRange(GeosparError):
    """Point lies outside the tree's root region."""


class OutOfRegion(GeosparError):
    """Update target lies outside the normalized bounding region."""


class AspectRatioTooLarge(GeosparError):
    """Points are closer than the maximum refinement level can resolve."""


class BadDimension(GeosparError):
    """Projection target dimension is not smaller than the source."""


class DimensionMismatch(GeosparError):
    """Vector dimension does not match the structure."""


class IndexOutOfRange(GeosparError):
    """Point index outside [0, n)."""


class NumericalFailure(GeosparError):
    """A dense factorization or eigensolve did not converge."""


class SingularMatrix(GeosparError):
    """Graph is disconnected where a pseudoinverse oracle needs connectivity."""


class ConfigError(GeosparError):
    """Malformed run configuration."""


class TraceError(GeosparError):
    """Malformed trace or points file; message carries the line number."""
