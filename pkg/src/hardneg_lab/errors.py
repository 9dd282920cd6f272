"""Exception types raised across the package."""


class HardnegError(Exception):
    """Base class for all package errors."""


class ZeroVector(HardnegError, ValueError):
    """A vector with (numerically) zero norm where a direction is required."""


class DimensionMismatch(HardnegError, ValueError):
    pass


class EmptyNegatives(HardnegError, ValueError):
    pass


class DegenerateSynthesis(HardnegError, RuntimeError):
    """Repeated synthetic draws all cancelled to the zero vector."""


class InvalidTemperature(HardnegError, ValueError):
    pass


class StaleCache(HardnegError, RuntimeError):
    """An activation cache was used for a second backward pass."""


class CenterSeparationFailure(HardnegError, RuntimeError):
    pass


class ParseError(HardnegError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RaggedRows(ParseError):
    pass


class SingleClass(HardnegError, ValueError):
    pass


class NonFiniteLoss(HardnegError, FloatingPointError):
    def __init__(self, step: int, value: float):
        self.step = step
        self.value = value
        super().__init__(f"non-finite loss {value!r} at step {step}")


class UsageError(HardnegError):
    pass
