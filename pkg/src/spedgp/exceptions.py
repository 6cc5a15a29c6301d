"""Error types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument violates a documented precondition."""


class SingularMatrixError(RuntimeError):
    """Raised when a required matrix factorization or inverse fails."""


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver exhausts its iteration budget.

    The ``residual`` attribute carries the last optimality residual so
    callers can report how far the solve was from its certificate.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class NumericalError(RuntimeError):
    """Raised on internal numerical inconsistencies (negative variances etc.)."""


class FitError(RuntimeError):
    """Raised when every restart of the fit driver fails.

    Carries the per-restart traces collected so far in ``traces``.
    """

    def __init__(self, message: str, traces=None):
        super().__init__(message)
        self.traces = traces
