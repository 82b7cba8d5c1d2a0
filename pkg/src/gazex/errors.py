"""Exception types raised across the pipeline."""


class GazexError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GazexError, ValueError):
    pass


class DegenerateLineError(InvalidInputError):
    pass


class NoValleyError(GazexError):
    """Histogram has fewer than two separable modes."""


class ParseError(GazexError):
    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class WrongModeError(InvalidInputError):
    pass


class ShapeError(GazexError, ValueError):
    pass


class InvariantViolationError(GazexError):
    pass


class TrainingError(GazexError):
    def __init__(self, epoch, message="non-finite loss"):
        self.epoch = epoch
        super().__init__(f"training diverged at epoch {epoch}: {message}")


class IncompleteTrialError(GazexError):
    pass
