"""Exception types shared across the package."""


class SphaeError(Exception):
    """Base class for all sphae errors."""


class InvalidBandwidthError(SphaeError, ValueError):
    """Bandwidth must be a positive integer."""


class DimensionMismatchError(SphaeError, ValueError):
    """Array shapes, bandwidths or channel counts do not agree."""


class NonRealSignalError(SphaeError, ValueError):
    """Spectrum violates the real-signal conjugate symmetry beyond tolerance."""


class CheckpointError(SphaeError, RuntimeError):
    """Checkpoint file is corrupt, has a wrong version, or conflicts with the config."""


class DataFormatError(SphaeError, ValueError):
    """On-disk dataset or IDX file is malformed."""


class ConfigConflictError(SphaeError, ValueError):
    """Mutually inconsistent flags or configuration values."""
