"""Shared exception types.

Exit-code mapping used by the CLI: ConfigError -> 2, ResourceCapError -> 3,
ConvergenceError -> 4.
"""

from __future__ import annotations


class ResourceCapError(RuntimeError):
    """A configured resource cap (atom count, word count, state count) was hit.

    The message always names the cap so that callers can tell a budget
    failure apart from an infeasible request.
    """

    def __init__(self, message: str, cap: int | float | None = None):
        super().__init__(message)
        self.cap = cap


class ConvergenceError(RuntimeError):
    """An iterative solver ran out of iterations; carries the best residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ConfigError(ValueError):
    """A run configuration failed validation; message points at the key."""
