"""Exception hierarchy shared by every module."""


class IntentMotionError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(IntentMotionError, ValueError):
    pass


class LabelError(IntentMotionError, ValueError):
    pass


class ContractError(IntentMotionError):
    """A caller broke an operation precondition (e.g. non-scalar grad output)."""


class EvaluationError(IntentMotionError):
    pass


class ConfigError(IntentMotionError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class SchemaError(IntentMotionError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ParseError(IntentMotionError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class SplitError(IntentMotionError, ValueError):
    pass


class CheckpointError(IntentMotionError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NumericError(IntentMotionError, FloatingPointError):
    def __init__(self, message, tensor=None):
        super().__init__(message)
        self.tensor = tensor
