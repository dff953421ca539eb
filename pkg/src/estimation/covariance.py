"""
Cluster-robust Covariance
"""

import logging
import warnings
from itertools import combinations
from typing import TYPE_CHECKING, FrozenSet, Iterable, List, Tuple

import numpy as np

from ..errors import DiagnosticsWarning, EstimationError
from .spec import Dim

if TYPE_CHECKING:
    from .spec import FitResult

logger = logging.getLogger(__name__)

CLUSTER_DF_MODES = ("conventional", "min")


def _codes(fit: 'FitResult', dims: Tuple[Dim, ...]) -> np.ndarray:
    keys = []
    for dim in dims:
        keys.append(fit.entity_idx if dim == Dim.ENTITY else fit.year_idx)
    stacked = np.column_stack(keys)
    return np.unique(stacked, axis=0, return_inverse=True)[1].ravel()


def sandwich(scores: np.ndarray, codes: np.ndarray, bread: np.ndarray) -> Tuple[np.ndarray, int]:
    """A (Σ_g S_g S_g') A for cluster score sums S_g; returns (V, G)."""
    n_groups = int(codes.max()) + 1
    sums = np.zeros((n_groups, scores.shape[1]))
    np.add.at(sums, codes, scores)
    meat = sums.T @ sums
    return bread @ meat @ bread, n_groups


def psd_floor(v: np.ndarray) -> np.ndarray:
    """Floor negative eigenvalues of a symmetric matrix at zero, warning if any were."""
    v = (v + v.T) / 2.0
    vals, vecs = np.linalg.eigh(v)
    if np.any(vals < 0):
        warnings.warn(
            f"Clustered covariance not PSD (min eigenvalue {vals.min():.3g}); flooring at 0",
            DiagnosticsWarning,
        )
        vals = np.clip(vals, 0.0, None)
        v = (vecs * vals) @ vecs.T
        v = (v + v.T) / 2.0
    return v


def cluster_vcov(
    fit: 'FitResult',
    dims: Iterable[Dim] = (Dim.ENTITY, Dim.YEAR),
    cluster_df: str = "conventional",
) -> np.ndarray:
    """
    Multi-way cluster-robust covariance by inclusion-exclusion.

    For two dimensions V = V_entity + V_year − V_entity×year. Each term is
    scaled by G/(G−1)·(n−1)/(n−K); with cluster_df="min" every term uses
    the smallest single-dimension G.

    Raises:
        EstimationError: a dimension with a single cluster, or unknown mode
    """
    if cluster_df not in CLUSTER_DF_MODES:
        raise EstimationError(f"Unknown cluster_df '{cluster_df}'")
    dims = tuple(sorted(set(dims), key=lambda d: d.value))
    if not dims:
        raise EstimationError("cluster_vcov needs at least one dimension")
    n, k = fit.design.shape
    scores = fit.scores
    adj_n = (n - 1) / max(n - k, 1)

    single_g: List[int] = []
    for dim in dims:
        g = int(np.unique(fit.entity_idx if dim == Dim.ENTITY else fit.year_idx).size)
        if g < 2:
            raise EstimationError(f"Clustering by {dim.value} needs at least two clusters, found {g}")
        single_g.append(g)
    g_min = min(single_g)

    total = np.zeros((k, k))
    for size in range(1, len(dims) + 1):
        sign = 1.0 if size % 2 == 1 else -1.0
        for subset in combinations(dims, size):
            v, g = sandwich(scores, _codes(fit, subset), fit.bread)
            g_eff = g_min if cluster_df == "min" else g
            scale = g_eff / (g_eff - 1) * adj_n if g_eff > 1 else adj_n
            total += sign * scale * v
    logger.debug(f"Clustered covariance over {[d.value for d in dims]} with G={single_g}")
    return psd_floor(total)
