"""Exception types shared across the package."""

from __future__ import annotations


class ProtocolError(RuntimeError):
    """Predict/update called out of order on a learner."""


class ProjectionError(RuntimeError):
    """Inner projection solver failed to converge.

    Carries the best iterate found and its optimality residual.
    """

    def __init__(self, message: str, best=None, residual: float | None = None):
        super().__init__(message)
        self.best = best
        self.residual = residual


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class DataError(ValueError):
    """Unreadable or malformed input data (CLI exit code 3)."""
