"""Error taxonomy shared across the package.

Three families map onto the CLI exit-code contract: configuration
problems (exit 1), bad input data (exit 2), upstream/transport failures
(exit 3).
"""


class SubjscanError(Exception):
    """Base class for all package errors."""


class ConfigError(SubjscanError):
    """Invalid or inconsistent run configuration."""


class DataError(SubjscanError):
    """Malformed or contract-violating input data."""


class TransportError(SubjscanError):
    """Failure while talking to an upstream chat endpoint."""
