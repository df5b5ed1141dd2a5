"""Exception types shared across the package."""


class FracGradError(Exception):
    """Base class for all package errors."""


class InvalidArgument(FracGradError, ValueError):
    """A parameter violates the documented precondition of an operation."""


class DegenerateInput(FracGradError, ValueError):
    """The input is valid but carries no usable information (e.g. 0/0)."""


class SingularInput(FracGradError, ValueError):
    """A kernel was evaluated on its singular set."""


class NumericalFailure(FracGradError, ArithmeticError):
    """An iterate became non-finite or a factorization broke down."""
