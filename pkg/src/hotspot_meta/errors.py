"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class HotspotError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class DataError(HotspotError):
    """Malformed input, dimension mismatch or otherwise unusable data."""

    exit_code = 2


class PlacementError(DataError):
    """Layout generator could not place the requested rectangles."""


class ModelFormatError(DataError):
    """Model file is truncated, corrupt or carries an unsupported version."""


class NumericError(HotspotError):
    """Divergence, exhausted regularization escalation, or similar."""

    exit_code = 3


class ModelVersionError(ModelFormatError):
    """Model file was written by an incompatible format version."""
