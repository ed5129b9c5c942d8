"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, data problems with 3 and numeric failures with 4.
"""


class GazeLabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(GazeLabError):
    """Invalid, missing or contradictory configuration."""

    exit_code = 2


class DataError(GazeLabError):
    """Problems with datasets, manifests or image files."""

    exit_code = 3


class NumericError(GazeLabError):
    """Non-finite losses or other numeric breakdown during optimization."""

    exit_code = 4


class ManifestParseError(DataError):
    """A manifest row or dataset filename does not match its documented format."""


class ExtractionError(DataError):
    """Eye-patch extraction failed (degenerate landmarks, unreadable image)."""


class GroundTruthNotFound(DataError):
    """No real sample exists for the requested (subject, pose, side, gaze)."""


class DegenerateInputError(DataError):
    """An input is degenerate for the requested metric (e.g. constant image)."""


class CheckpointError(GazeLabError):
    """Checkpoint file is corrupt, truncated or from a different architecture."""
