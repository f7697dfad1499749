"""Exception types raised across the package."""


class PiranhaError(Exception):
    pass


class ShapeError(PiranhaError, ValueError):
    """Array dimensions disagree with the network shape."""


class SeriesRangeError(PiranhaError, IndexError):
    """The series is too short for the requested time indices."""


class HyperparameterError(PiranhaError, ValueError):
    pass


class NumericError(PiranhaError, ArithmeticError):
    """A non-finite value appeared during a computation."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.iteration = iteration


class DataError(PiranhaError, ValueError):
    """Series file could not be parsed or holds too little data."""


class FormatError(PiranhaError, ValueError):
    """A persisted artifact has the wrong header, version or size."""
