class SpectralError(Exception):
    """Base class for every failure raised by the spectral library."""


class UnreachableTolerance(SpectralError):
    """The requested accuracy cannot be met within the evaluation budget."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class NotAMeasure(SpectralError):
    """A construction (typically a convolution) does not define a locally finite measure."""


class Unsupported(SpectralError):
    """No implemented rule covers the given combination of measure kinds."""


class SeedStreamExhausted(SpectralError):
    """The seed/path index space of the counter-based generator is exhausted."""


class InconsistentGrid(SpectralError):
    """A normal-field grid does not belong to the measure it is used with."""


class InsufficientPairs(SpectralError):
    """Too few time pairs at the requested lag for a stationarity check."""


class ConfigError(SpectralError):
    """A configuration file or expression could not be parsed."""

    def __init__(self, message, line=None, column=None, source=None):
        location = ""
        if line is not None:
            location = f" (line {line}, column {column})"
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column
        self.source = source
