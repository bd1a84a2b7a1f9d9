"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input violates a documented precondition or admissibility bound."""


class NumericalError(RuntimeError):
    """A numerical routine failed to reach its accuracy target."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not converge within the evaluation budget.

    Carries the residual error estimate at the point of failure.
    """

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class RecordNotFoundError(LookupError):
    """No parameter record matches the requested model kind / timestamp."""


class QuoteParseError(ValueError):
    """A quote file failed to parse; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
