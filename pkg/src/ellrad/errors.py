"""Exception types shared across the package."""


class EllradError(Exception):
    """Base class for all package errors."""


class DomainError(EllradError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class FocalPointError(DomainError):
    """A point coincides with an emitter or receiver position."""


class FocalSegmentError(DomainError):
    """A point lies on the open segment between the foci, where the
    level-set gradient (and hence the backprojection weight) degenerates."""


class SupportViolationError(EllradError, ValueError):
    """A phantom shape escapes the supported disc."""

    def __init__(self, message, shape_index=None):
        super().__init__(message)
        self.shape_index = shape_index


class ConfigurationError(EllradError, ValueError):
    """Inconsistent grids, specs, or command line configuration."""


class SinogramParseError(EllradError, ValueError):
    """A sinogram file is malformed; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class BracketingError(EllradError, RuntimeError):
    """A 1-d root search failed to bracket a solution.

    Carries the sampled mismatch curve for diagnostics.
    """

    def __init__(self, message, s_samples=None, mismatch=None):
        super().__init__(message)
        self.s_samples = s_samples
        self.mismatch = mismatch
