"""Exception and warning types raised across the package."""


class ParameterError(ValueError):
    """An argument is outside its documented domain."""


class CapacityError(ParameterError):
    """A requested grid or buffer would be too large to allocate."""


class FormatError(ValueError):
    """A file or word does not follow its on-disk format.

    ``line`` is the 1-based line number of the offending input, when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class AlignmentError(ValueError):
    """Cross-correlation alignment is undefined for the given inputs."""


class RecoveryWarning(UserWarning):
    """Unwrapping hit its per-step fold clamp; the output may be wrong."""
