"""Exception hierarchy shared by every module of the package."""


class SetreeError(Exception):
    """Base class for all errors raised by setree."""


class ParseError(SetreeError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionError(SetreeError, ValueError):
    pass


class ValidationError(SetreeError, ValueError):
    pass


class DomainError(SetreeError, ValueError):
    pass


class DegenerateInputError(SetreeError, ValueError):
    pass


class CapacityError(SetreeError, ValueError):
    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)


class TapeStateError(SetreeError, RuntimeError):
    pass


class TrainingError(SetreeError, RuntimeError):
    pass
