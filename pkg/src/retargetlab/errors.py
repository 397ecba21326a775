"""Exception types shared across the package."""


class RetargetLabError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(RetargetLabError):
    """Input data violates a documented invariant."""


class ShapeError(RetargetLabError):
    """Array or tensor shapes are incompatible for the requested operation."""


class NonFiniteError(RetargetLabError):
    """A numeric operation produced NaN or infinity."""


class BvhParseError(RetargetLabError):
    """Malformed BVH input. Carries the 1-based line number of the offending token."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class ClipFormatError(RetargetLabError):
    """Malformed clip or dataset file."""


class ConfigError(RetargetLabError):
    """Bad training configuration (unknown key, unparsable value, invalid range)."""


class TrainingAborted(RetargetLabError):
    """Training stopped because a loss became non-finite."""
