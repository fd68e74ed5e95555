class PipelineError(Exception):
    """Base class for every error raised by the pose pipeline."""


class InputError(PipelineError, ValueError):
    """Inputs violate a documented precondition or file format."""


class SchemaError(InputError):
    pass


class SkeletonError(InputError):
    """Skeleton definition is not a valid limb tree."""


class DimensionMismatchError(InputError):
    pass


class ChecksumError(InputError):
    pass


class FormatVersionError(InputError):
    pass


class UnprocessablePoseError(InputError):
    """The trunk guarantee is not met, so the pose cannot be lifted."""


class NumericalError(PipelineError, ArithmeticError):
    """Non-finite values, singular blocks or a diverging optimization."""
