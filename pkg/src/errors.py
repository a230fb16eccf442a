"""Exception hierarchy shared by the pipeline and the CLI.

Each class carries the process exit code the CLI reports for it.
"""


class TonesplatError(Exception):
    """Base class for all tonesplat errors."""

    exit_code: int = 2


class UsageError(TonesplatError):
    """Bad flags or configuration values."""

    exit_code = 1


class DataError(TonesplatError):
    """Missing or malformed input data."""

    exit_code = 2


class ImagingError(DataError):
    """Image I/O or metric precondition failure."""


class SceneError(DataError):
    """Invalid scene file, Gaussian, or camera."""


class NumericalError(TonesplatError):
    """Numerical failure during evaluation or optimization."""

    exit_code = 3


class NonFiniteError(NumericalError):
    """A loss, loss component, or activation became NaN or infinite."""


class SingularMatrixError(NumericalError):
    """A colour matrix is too close to singular to invert."""


class GradientError(NumericalError):
    """Gradient computation was requested in an invalid way."""
