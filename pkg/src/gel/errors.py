"""Error taxonomy shared across the package.

Every error carries the process exit code the command line tool maps it to:
parse errors exit 2, validation errors 3, numeric errors 4, I/O errors 5.
"""


class GelError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ParseError(GelError):
    """Malformed textual input (edge lists, configs, witnesses)."""

    exit_code = 2


class ValidationError(GelError):
    """Input violates a documented precondition."""

    exit_code = 3


class ConfigurationError(ValidationError):
    """A model description is incomplete or inconsistent."""


class DegenerateInputError(ValidationError):
    """Input sits on a measure-zero set where the prediction is undefined."""


class HypothesisError(ValidationError):
    """A theorem hypothesis needed by the requested computation fails."""


class RegimeError(ValidationError):
    """The requested quantity is only defined in another spectral regime."""


class NumericError(GelError):
    """Overflow, non-finite values, or a resource limit was hit."""

    exit_code = 4


class GelIOError(GelError):
    """File could not be read or written."""

    exit_code = 5
