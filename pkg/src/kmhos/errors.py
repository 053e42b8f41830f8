"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ConvergenceError(ArithmeticError):
    """A series, quadrature or iteration failed to meet its tolerance."""


class DivergenceError(ConvergenceError):
    """An asymptotic series shows sustained term growth."""


class DegenerateError(ArithmeticError):
    """A derived quantity is undefined (e.g. vanishing variance)."""
