"""Exception hierarchy shared by all singit modules."""


class SingitError(Exception):
    """Base class for every error raised deliberately by singit."""


class DegenerateInputError(SingitError, ValueError):
    """Input is valid in type but carries no usable signal (empty, silent, zero-norm)."""


class ShapeError(SingitError, ValueError):
    pass


class ValidationError(SingitError, ValueError):
    pass


class ConfigurationError(SingitError):
    pass


class AdapterError(SingitError, RuntimeError):
    """The external source separator failed or produced unusable stems."""


class AudioIOError(SingitError, OSError):
    pass


class CheckpointError(SingitError, ValueError):
    pass


class TrainingDivergedError(SingitError, FloatingPointError):
    pass
