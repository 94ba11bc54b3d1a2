"""Exception types raised across the package."""


class TopoImgError(Exception):
    """Base class for all package errors."""


class DomainError(TopoImgError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ParseError(TopoImgError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatVersionError(TopoImgError, ValueError):
    pass


class ChecksumError(TopoImgError, ValueError):
    pass


class RankDeficientError(TopoImgError, ArithmeticError):
    def __init__(self, message, condition=None):
        self.condition = condition
        super().__init__(message)


class ZeroNormalizerError(TopoImgError, ArithmeticError):
    """An indicator field cannot be normalized (no negative minimum / positive maximum)."""

    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class GridMismatchError(TopoImgError, ValueError):
    pass


class ConvergenceError(TopoImgError, ArithmeticError):
    pass
