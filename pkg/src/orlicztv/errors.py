"""Exception types shared across the package."""

__all__ = ["NumericalError"]


class NumericalError(RuntimeError):
    """An iterative routine failed to reach its tolerance.

    Carries the offending residual and, when meaningful, the iteration
    index at which the failure was detected.
    """

    def __init__(self, message: str, residual: float | None = None,
                 iteration: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iteration = iteration
