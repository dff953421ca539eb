"""
Inference Helpers (p-values, significance codes)
"""

from typing import Optional

import numpy as np
from scipy import stats

# R-style codes: ***: 0.001, **: 0.01, *: 0.05, .: 0.1
SIGNIF_LEVELS = ((0.001, "***"), (0.01, "**"), (0.05, "*"), (0.1, "."))


def pvalues(estimate: np.ndarray, se: np.ndarray, dist: str = "normal", dof: Optional[int] = None) -> np.ndarray:
    """
    Two-sided p-values for estimate/se.

    Args:
        estimate: Point estimates
        se: Standard errors
        dist: "normal" or "t"
        dof: Degrees of freedom for the t reference

    Returns:
        Array of p-values; NaN where se is zero
    """
    estimate = np.asarray(estimate, dtype=float)
    se = np.asarray(se, dtype=float)
    with np.errstate(divide='ignore', invalid='ignore'):
        z = np.where(se > 0, estimate / np.where(se > 0, se, 1.0), np.nan)
    if dist == "t":
        if dof is None or dof < 1:
            raise ValueError("t reference needs dof >= 1")
        return 2.0 * stats.t.sf(np.abs(z), dof)
    return 2.0 * stats.norm.sf(np.abs(z))


def signif_code(p: float) -> str:
    """Significance code for a p-value."""
    if p is None or not np.isfinite(p):
        return ""
    for level, code in SIGNIF_LEVELS:
        if p < level:
            return code
    return ""


def critical_value(level: float = 0.95) -> float:
    """Two-sided normal critical value."""
    return float(stats.norm.ppf(0.5 + level / 2.0))
