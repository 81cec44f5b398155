"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Malformed or non-finite input data."""


class InvalidParameterError(ValueError):
    """A scalar parameter outside its admissible range."""


class DegenerateInputError(InvalidInputError):
    """Input that makes a construction meaningless (e.g. a zero solution)."""


class CapacityError(ArithmeticError):
    """A piecewise polynomial would exceed the configured degree cap."""


class ExhaustedGridError(RuntimeError):
    """No point of the regularization-parameter grid met the discrepancy bound."""

    def __init__(self, message, best_alpha=None, best_residual=None, best_x=None):
        super().__init__(message)
        self.best_alpha = best_alpha
        self.best_residual = best_residual
        self.best_x = best_x
