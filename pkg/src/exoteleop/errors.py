"""Exception types shared across the package."""


class TeleopError(Exception):
    """Base class for all errors raised by this package."""


class InvalidRangeError(TeleopError, ValueError):
    """A range is degenerate or inverted (lo > hi, zero-width robot range, ...)."""


class InvalidInputError(TeleopError, ValueError):
    """A numeric argument is out of contract (non-finite, non-positive dt, ...)."""


class SchemaError(TeleopError, ValueError):
    """Structured data does not match the expected shape or dimension."""


class InvalidStateError(TeleopError, RuntimeError):
    """An operation was applied to an object in the wrong state or world type."""


class ConfigurationError(TeleopError, ValueError):
    """Missing or inconsistent configuration (unknown featurizer, empty dataset, ...)."""
