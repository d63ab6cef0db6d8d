"""Exception types shared across the package."""

__all__ = ["ConfigError", "SolverError"]


class ConfigError(ValueError):
    """A scenario configuration failed validation."""


class SolverError(RuntimeError):
    """A linear solve failed; carries the last residual when available."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
