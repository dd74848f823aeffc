"""Typed error hierarchy shared by all codec components."""


class IrecError(Exception):
    """Base class for every error raised by this package."""


class UsageError(IrecError):
    """Caller violated a documented precondition (bad arguments, mismatched dims)."""


class ConfigError(IrecError):
    """Configuration rejected up front (index width overflow, memory budget)."""


class FormatError(IrecError):
    """Container or model file does not match the expected format."""


class CorruptStreamError(IrecError):
    """Well-formed header but damaged or truncated payload."""


class ModelMismatchError(IrecError):
    """Container was produced with a different model file."""


class NumericError(IrecError):
    """Numerically degenerate input (all-zero or NaN weights)."""
