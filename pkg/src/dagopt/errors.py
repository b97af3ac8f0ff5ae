"""Exception types shared across the package."""


class DagOptError(Exception):
    """Base class for all package errors."""


class InvalidInputError(DagOptError, ValueError):
    """Raised when an argument violates a documented precondition."""


class NumericOverflowError(DagOptError, ArithmeticError):
    """Raised when an intermediate quantity would overflow double precision."""


class ConfigError(DagOptError, ValueError):
    """Raised for malformed solver or experiment configuration.

    The offending field name is kept in ``field`` so the CLI can report it.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
