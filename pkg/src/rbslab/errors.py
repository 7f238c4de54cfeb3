"""Exception hierarchy shared by every rbslab module."""


class RBSError(Exception):
    """Base class for all library errors."""


class InvalidArgument(RBSError, ValueError):
    pass


class InvalidState(RBSError, RuntimeError):
    pass


class ParseError(RBSError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DimensionError(RBSError, ValueError):
    pass


class BudgetExceeded(RBSError, RuntimeError):
    """Raised when an oracle session would exceed its query budget."""


class TooLarge(RBSError, ValueError):
    pass


class CanonicalizationTimeout(RBSError, RuntimeError):
    """The individualization-refinement search ran out of nodes.

    Raised instead of returning a possibly wrong certificate.
    """

    def __init__(self, message: str, draw: object = None):
        self.draw = draw
        if draw is not None:
            message = f"{message} (draw {draw})"
        super().__init__(message)


class TrainingDiverged(RBSError, ArithmeticError):
    pass


class BoundViolation(RBSError, AssertionError):
    """An experiment observed a value outside a claimed bound."""
