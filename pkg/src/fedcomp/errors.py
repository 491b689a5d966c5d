"""Exception hierarchy shared across the package.

ConfigError and DataError map onto the CLI exit codes (2 and 3); the
DecodeError family covers malformed wire bytes and is a kind of DataError
so that inspecting a corrupt file exits with the data-error code.
"""


class FedcompError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FedcompError):
    """Invalid configuration file or option values (CLI exit code 2)."""


class DataError(FedcompError):
    """Missing or malformed input data (CLI exit code 3)."""


class DecodeError(DataError):
    """Malformed serialized update bytes."""


class BadMagicError(DecodeError):
    """Leading magic bytes do not identify a known wire format."""


class BadVersionError(DecodeError):
    """Recognized format but unsupported version byte."""


class TruncatedError(DecodeError):
    """Byte sequence ends before the declared payload does."""


class IndexOrderError(DecodeError):
    """Transmitted coordinate indices are not strictly increasing."""
