"""
Toolkit Exceptions
"""

from typing import List, Optional, Sequence

import numpy as np


class ToolkitError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class PanelValidationError(ToolkitError, ValueError):
    """Input data or a specification failed validation."""

    exit_code = 2


class EstimationError(ToolkitError, RuntimeError):
    """An estimator could not produce a fit."""

    exit_code = 3


class ConvergenceError(EstimationError):
    """Iterative procedure stopped without meeting its tolerance."""

    def __init__(self, message: str, iterates: Optional[Sequence[np.ndarray]] = None):
        super().__init__(message)
        self.iterates: List[np.ndarray] = [np.asarray(it) for it in (iterates or [])]


class CollinearityError(EstimationError):
    """Design matrix is rank deficient after demeaning."""

    def __init__(self, message: str, columns: Sequence[str]):
        super().__init__(f"{message}: {', '.join(columns)}")
        self.columns = list(columns)


class DiagnosticsWarning(UserWarning):
    """Recoverable data or numerical issue worth reporting."""
