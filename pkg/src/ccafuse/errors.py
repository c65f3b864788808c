"""Exception hierarchy shared by every module."""


class CcaError(Exception):
    """Base class for all library errors."""


class DegenerateInputError(CcaError, ValueError):
    """Input is structurally valid but carries too little information."""


class DimensionError(CcaError, ValueError):
    """Array shapes are inconsistent with each other or with a model."""


class ParameterError(CcaError, ValueError):
    """A scalar parameter is outside its admissible range."""


class SingularityError(CcaError, ArithmeticError):
    """A matrix that must be positive definite is (numerically) singular."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class TrainingError(CcaError, RuntimeError):
    """Training diverged; ``epoch`` names the epoch where it happened."""

    def __init__(self, message, epoch):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


class FormatError(CcaError, ValueError):
    """A tensor, CSV or JSON file could not be parsed."""


class ConfigError(CcaError, ValueError):
    """An experiment config is malformed; ``field`` is the dotted path of the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"config field '{field}': {message}" if field else message)
        self.field = field
