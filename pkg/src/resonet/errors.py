"""Exception hierarchy shared across the package.

Exceptions carry the process exit code the command-line front end maps
them to: configuration problems exit with 2, data problems with 3 and
numerical failures with 4.
"""


class ResonetError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(ResonetError):
    """Invalid or inconsistent run configuration."""

    exit_code = 2


class DataError(ResonetError):
    """Problem with corpus data, caches or intermediate artifacts."""

    exit_code = 3


class NumericalError(ResonetError):
    """A numerical routine failed to produce a usable result."""

    exit_code = 4


class ManifestError(DataError):
    """Malformed or inconsistent corpus manifest."""


class AudioFormatError(DataError):
    """Unsupported or corrupt audio payload."""


class PartitionError(DataError):
    """Corpus does not satisfy the balanced profile a partition needs."""


class CacheError(DataError):
    """Cache file is corrupt, stale or belongs to a different config."""


class DegenerateInputWarning(UserWarning):
    """Emitted when an operation receives an all-zero input and falls
    back to a documented degenerate result instead of failing."""
