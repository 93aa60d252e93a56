"""Exception hierarchy shared by the library and the command line."""


class QmsError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(QmsError, ValueError):
    """Array dimensions disagree with the model or with each other."""


class ConfigError(QmsError, ValueError):
    """Invalid hyperparameter or configuration value."""


class DataError(QmsError, ValueError):
    """Malformed or inconsistent input data."""


class ModelFormatError(DataError):
    """A model document could not be parsed.

    ``location`` is a JSON-path-like pointer (``members[1].A[0]``) or a
    ``line:col`` pair for syntax errors.
    """

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class NumericalError(QmsError, ArithmeticError):
    """A NaN or infinity surfaced where the guards should have prevented it."""
