"""Exception types shared across the package."""


class DeciWatchError(Exception):
    """Base class for all package errors."""


class DimensionError(DeciWatchError, ValueError):
    """Array shapes are incompatible for the requested operation."""


class ConfigError(DeciWatchError, ValueError):
    """A configuration value is invalid or inconsistent."""


class UsageError(DeciWatchError, RuntimeError):
    pass


class RangeError(DeciWatchError, ValueError):
    """A query lies outside the interval an interpolant is defined on."""


class SequenceTooShortError(DeciWatchError, ValueError):
    def __init__(self, frames: int, required: int):
        super().__init__(f"sequence has {frames} frames, at least {required} required")
        self.frames = frames
        self.required = required


class ParseError(DeciWatchError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class DivergenceError(DeciWatchError, ArithmeticError):
    """Training produced a non-finite loss.

    ``checkpoint`` holds the last parameters that produced a finite loss.
    """

    def __init__(self, message: str, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint
