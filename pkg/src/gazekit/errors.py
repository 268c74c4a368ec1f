"""Exception hierarchy shared across the toolkit."""


class GazeKitError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(GazeKitError):
    """A parameter violates its declared constraints (e.g. sigma <= 0)."""


class DimensionError(GazeKitError):
    """Two arrays that must share a shape do not."""


class RejectedInputError(GazeKitError):
    """An input value is outside the operation's domain (e.g. z <= 0)."""


class DegenerateRegionError(GazeKitError):
    """A pixel region contains no valid-depth pixels."""


class DegenerateGazeError(GazeKitError):
    """Eye and gaze point coincide, leaving the gaze direction undefined."""


class UndefinedMetricError(GazeKitError):
    """A metric has no defined value for this input (e.g. single-class AUC)."""


class AnnotationParseError(GazeKitError):
    """A malformed or out-of-range annotation row; carries the row number."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class MergeConflictError(GazeKitError):
    """Rows sharing an (image, head box) key disagree on other fields."""


class WeightFormatError(GazeKitError):
    """A weight bundle file is corrupt or has an unknown layout."""


class FileFormatError(GazeKitError):
    """An image/depth file is unsupported, truncated, or inconsistent."""
