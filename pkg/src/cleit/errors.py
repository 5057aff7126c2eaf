"""Exception types shared across the package."""


class CleitError(Exception):
    """Base class for all package errors."""


class DimensionError(CleitError):
    """Operand shapes do not conform."""


class NumericsError(CleitError):
    """A computation produced or received non-finite values."""


class ConfigError(CleitError):
    """Invalid configuration value."""


class DataError(CleitError):
    """Malformed or inconsistent input data."""
