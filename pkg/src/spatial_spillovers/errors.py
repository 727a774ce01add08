class AssumptionError(ValueError):
    """Raised when a model input violates a structural assumption.

    The message names the violated invariant so the CLI can surface it.
    """


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver fails to reach its tolerance.

    ``last`` holds the final iterate (or whatever partial result the solver
    had) so callers can still report it.
    """

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class InsufficientDataError(ValueError):
    """Too few samples to support a requested fit."""
