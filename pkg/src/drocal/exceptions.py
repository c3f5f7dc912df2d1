"""Exception types shared across the package."""


class DrocalError(Exception):
    """Base class for package errors."""


class ConfigError(DrocalError):
    """Invalid or inconsistent experiment configuration."""


class DataError(DrocalError):
    """Malformed input data (parse failures, missing cells, bad labels)."""


class SolverError(DrocalError):
    """An optimization routine failed to converge.

    Attributes:
        x: last iterate reached before giving up.
        iterations: number of iterations performed.
        residual: stationarity residual at ``x``.
        trace: optional list of per-iteration residuals.
    """

    def __init__(self, message, x=None, iterations=0, residual=float("nan"), trace=None):
        super().__init__(message)
        self.x = x
        self.iterations = iterations
        self.residual = residual
        self.trace = trace or []
