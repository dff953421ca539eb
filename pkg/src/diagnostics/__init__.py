"""
Cross-sectional Dependence Tests and Model Comparison
"""

from .comparison import compare_models
from .csd import (
    CsdTestResult, bp_lm, csd_battery, pairwise_correlations, pesaran_cd, pesaran_cd_permutation,
    pooled_ols_residuals, residual_csd, scaled_lm,
)

__all__ = [
    'CsdTestResult',
    'bp_lm',
    'compare_models',
    'csd_battery',
    'pairwise_correlations',
    'pesaran_cd',
    'pesaran_cd_permutation',
    'pooled_ols_residuals',
    'residual_csd',
    'scaled_lm',
]
