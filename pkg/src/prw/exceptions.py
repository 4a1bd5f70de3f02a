"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Raised when arguments violate a documented precondition."""


class InfeasibleMarginalsError(InvalidInputError):
    """Raised when transport marginals do not carry the same total mass."""


class DegenerateStepError(ArithmeticError):
    """Raised when a retraction step loses column rank."""
