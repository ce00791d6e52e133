"""Exception types shared across the package."""


class LabError(Exception):
    """Base class for all package errors."""


class ConfigError(LabError, ValueError):
    """Invalid parameters or a malformed configuration document."""


class DimensionError(LabError, ValueError):
    """Array shapes do not fit together."""


class PreconditionError(LabError, ValueError):
    """An operation was called outside its domain."""


class DegenerateParameters(LabError, ValueError):
    """Parameters leave nothing to compute (for example an empty sample size)."""


class DomainError(LabError, ValueError):
    """A numeric argument lies outside the function's domain."""


class LabIOError(LabError, OSError):
    """Reading or writing a file failed; the message names the path."""
