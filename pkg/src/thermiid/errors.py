"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


class DegenerateRangeError(InvalidInputError):
    """Raised when an image has no dynamic range to normalize."""


class SolverError(RuntimeError):
    """Raised when an iterative computation fails to produce a finite answer."""

    def __init__(self, message, term=None, residual=None):
        super().__init__(message)
        self.term = term
        self.residual = residual
