"""Exception types shared across the package."""


class BurnscarError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(BurnscarError):
    """Input data does not match the expected band/field schema."""


class AlignmentError(BurnscarError):
    """Rasters or feature grids are not co-registered as required."""


class IntegrityError(BurnscarError):
    """An on-disk archive or checkpoint is corrupt or truncated."""


class GenerationError(BurnscarError):
    """Synthetic scene generation could not satisfy the requested spec."""


class TrainingError(BurnscarError):
    """Training aborted due to a non-finite loss or gradient."""


class GradCheckError(BurnscarError):
    """Analytic gradients disagree with finite differences."""


class CompatibilityError(BurnscarError):
    """A checkpoint and a dataset do not agree on shapes or channels."""
