"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: configuration problems and bad input
data exit 2, numerical failures exit 3 (usage errors are handled by the
argument parser and exit 1).
"""


class SpectransferError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(SpectransferError):
    """Invalid configuration: bad grid, empty dataset, mismatched shapes."""


class InputError(SpectransferError):
    """Invalid data handed to an operation (non-finite values, shape mismatch)."""


class DegenerateInputError(InputError):
    """Input is structurally valid but degenerate (e.g. constant intensity)."""


class ParseError(SpectransferError):
    """A data file could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class NumericalError(SpectransferError):
    """A numerical routine failed where success was required."""
