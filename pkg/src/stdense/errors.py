"""Exception types raised across the package."""


class StdenseError(Exception):
    """Base class for all package errors."""


class ParameterError(StdenseError, ValueError):
    """An argument violates a documented precondition."""


class InputShapeError(StdenseError, ValueError):
    """Array dimensions do not match what the operation expects."""


class DegenerateBatchError(StdenseError, ValueError):
    pass


class DegenerateTargetError(StdenseError, ValueError):
    pass


class DivergenceError(StdenseError, FloatingPointError):
    """Non-finite values appeared in network parameters."""

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class TrainingError(StdenseError, RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class NumericError(StdenseError, ArithmeticError):
    pass


class ParseError(StdenseError, ValueError):
    """Malformed input file. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FieldError(ParseError):
    pass


class AggregationError(StdenseError, ValueError):
    pass


class ConfigError(StdenseError, ValueError):
    pass
