"""Error hierarchy for gbede.

Every error carries the name of the operation that failed so the CLI can
report it without inspecting tracebacks.
"""

from typing import Optional

import numpy as np


class GbedeError(Exception):
    """Base class for all gbede failures."""

    def __init__(self, message: str, *, operation: Optional[str] = None):
        super().__init__(message)
        self.operation = operation


class DomainError(GbedeError, ValueError):
    """Parameters or arguments outside the feasible domain."""


class QuadratureError(GbedeError, ArithmeticError):
    """An integral or series did not converge."""

    def __init__(
        self,
        message: str,
        *,
        best_estimate: float = float("nan"),
        operation: Optional[str] = None,
    ):
        super().__init__(message, operation=operation)
        self.best_estimate = best_estimate


class ConvergenceError(GbedeError, ArithmeticError):
    """An optimizer or equation solver stopped without converging."""

    def __init__(
        self,
        message: str,
        *,
        best_point: Optional[np.ndarray] = None,
        iterations: int = 0,
        operation: Optional[str] = None,
    ):
        super().__init__(message, operation=operation)
        self.best_point = best_point
        self.iterations = iterations


class NoRootError(ConvergenceError):
    """No start of a multistart search reached a root."""


class SingularMatrixError(GbedeError, ArithmeticError):
    """A matrix that must be inverted is singular."""

    def __init__(
        self, message: str, *, matrix_name: str, operation: Optional[str] = None
    ):
        super().__init__(message, operation=operation)
        self.matrix_name = matrix_name


class DatasetError(GbedeError, ValueError):
    """Unknown dataset name or malformed data file."""
