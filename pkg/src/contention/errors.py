"""Exception types shared across the package.

The CLI maps these onto distinct exit codes: config errors exit 2, data and
shape errors exit 3, numeric failures exit 4.
"""


class ContentionError(Exception):
    """Base class for all package errors."""


class ShapeError(ContentionError, ValueError):
    """Operands have incompatible or malformed dimensions."""


class ConfigError(ContentionError, ValueError):
    """Invalid configuration value or file."""


class DataError(ContentionError, ValueError):
    """Dataset content violates a documented precondition."""


class SchemaError(DataError):
    """Trace file does not match the declared column schema."""


class NumericError(ContentionError, RuntimeError):
    """A computation produced or encountered non-finite values."""


class CacheMismatchError(ContentionError, RuntimeError):
    """Backward pass invoked with a cache from a different forward call."""
