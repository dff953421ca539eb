"""
Panel Estimators: TWFE, Spatial ML and Heterogeneous Time Trends
"""

from .covariance import cluster_vcov
from .design import Design, ModelSpecConfig, build_design, load_spec_file, read_group_labels
from .factors import FactorFit, FactorSelection, fit_htt, select_factors
from .impacts import ImpactsResult, impacts
from .inference import pvalues, signif_code
from .spatial import SpatialFit, audit_likelihood, fit_sarar, fit_sem, fit_slm
from .spec import BaseFit, Dim, Estimator, FitResult, ModelSpec, prepare_sample
from .twfe import (
    demean, fit_twfe, lincom_table, linear_combination, lsdv_fit, make_interaction, within_transform,
)

__all__ = [
    'BaseFit',
    'Design',
    'Dim',
    'Estimator',
    'FactorFit',
    'FactorSelection',
    'FitResult',
    'ImpactsResult',
    'ModelSpec',
    'ModelSpecConfig',
    'SpatialFit',
    'audit_likelihood',
    'build_design',
    'cluster_vcov',
    'demean',
    'fit_htt',
    'fit_sarar',
    'fit_sem',
    'fit_slm',
    'fit_twfe',
    'impacts',
    'lincom_table',
    'linear_combination',
    'load_spec_file',
    'lsdv_fit',
    'make_interaction',
    'prepare_sample',
    'pvalues',
    'read_group_labels',
    'select_factors',
    'signif_code',
    'within_transform',
]
