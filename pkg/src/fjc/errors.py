"""Shared exception types."""


class GraphFormatError(ValueError):
    """Raised for malformed edge-list or trace input, with a line/event position."""


class ConvergenceError(RuntimeError):
    """An iterative method ran out of iterations.

    Carries the last iterate so callers can inspect how close it got.
    """

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
