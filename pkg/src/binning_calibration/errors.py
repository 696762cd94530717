"""Exception hierarchy shared by the library and the command line."""


class CalibrationError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class DataError(CalibrationError):
    """Unreadable, malformed or out-of-range input data."""

    exit_code = 3


class InvalidConfigurationError(CalibrationError):
    """A precondition on sizes, bin counts or levels is violated."""

    exit_code = 4


class FitError(InvalidConfigurationError):
    """A calibrator could not produce a model from the given data."""
