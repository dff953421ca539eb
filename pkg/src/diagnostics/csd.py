"""
Cross-sectional Dependence Tests
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from ..errors import DiagnosticsWarning, PanelValidationError
from ..synth.rng import substreams

logger = logging.getLogger(__name__)

MIN_PERIODS = 3
PERMUTATION_DRAWS = 999


@dataclass(frozen=True)
class CsdTestResult:
    """One cross-sectional dependence test."""

    method: str
    statistic: float
    p_value: float
    alternative: str
    mean_rho: float
    mean_abs_rho: float
    n_entities: int
    n_pairs: int

    def as_row(self) -> dict:
        return {
            'method': self.method,
            'statistic': self.statistic,
            'p_value': self.p_value,
            'alternative': self.alternative,
            'mean_rho': self.mean_rho,
            'mean_abs_rho': self.mean_abs_rho,
            'n_entities': self.n_entities,
            'n_pairs': self.n_pairs,
        }


@dataclass(frozen=True, eq=False)
class PairwiseCorrelations:
    """Upper-triangle pairwise correlations with overlap counts."""

    rho: np.ndarray
    t_ij: np.ndarray
    n_entities: int

    @property
    def n_pairs(self) -> int:
        return int(self.rho.size)


def _drop_constant(e: np.ndarray) -> np.ndarray:
    valid = ~np.isnan(e)
    counts = valid.sum(axis=1)
    filled = np.where(valid, e, 0.0)
    mean = filled.sum(axis=1) / np.maximum(counts, 1)
    var = np.where(valid, (filled - mean[:, None]) ** 2, 0.0).sum(axis=1)
    keep = (counts >= MIN_PERIODS) & (var > 1e-12 * np.maximum(1.0, np.abs(mean)) ** 2)
    dropped = int((~keep).sum())
    if dropped:
        message = f"Excluded {dropped} entities with zero variance or fewer than {MIN_PERIODS} periods"
        warnings.warn(message, DiagnosticsWarning)
        logger.warning(message)
    return e[keep]


def pairwise_correlations(e: np.ndarray) -> PairwiseCorrelations:
    """
    Pearson correlations of every entity pair over their overlapping periods.

    NaN cells are missing; pairs with fewer than three common periods are skipped.

    Raises:
        PanelValidationError: fewer than two usable entities or T < 3
    """
    e = np.asarray(e, dtype=float)
    if e.ndim != 2 or e.shape[1] < MIN_PERIODS:
        raise PanelValidationError(f"CSD tests need an N×T matrix with T >= {MIN_PERIODS}")
    e = _drop_constant(e)
    n = e.shape[0]
    if n < 2:
        raise PanelValidationError("CSD tests need at least two entities with variation")

    m = (~np.isnan(e)).astype(float)
    z = np.where(np.isnan(e), 0.0, e)
    t_ij = m @ m.T
    s = z @ m.T
    q = (z * z) @ m.T
    cross = z @ z.T
    with np.errstate(divide='ignore', invalid='ignore'):
        cov = cross - s * s.T / t_ij
        var_i = q - s * s / t_ij
        var_j = q.T - s.T * s.T / t_ij
        rho = cov / np.sqrt(var_i * var_j)

    iu = np.triu_indices(n, k=1)
    rho_u = rho[iu]
    t_u = t_ij[iu]
    ok = (t_u >= MIN_PERIODS) & np.isfinite(rho_u)
    if not ok.all():
        skipped = int((~ok).sum())
        warnings.warn(f"Skipped {skipped} entity pairs with too little overlap", DiagnosticsWarning)
        logger.warning(f"Skipped {skipped} entity pairs with too little overlap")
    return PairwiseCorrelations(np.clip(rho_u[ok], -1.0, 1.0), t_u[ok], n)


def _cd_from(pc: PairwiseCorrelations) -> float:
    n = pc.n_entities
    return float(np.sqrt(2.0 / (n * (n - 1))) * np.sum(np.sqrt(pc.t_ij) * pc.rho))


def pesaran_cd(e: np.ndarray) -> CsdTestResult:
    """Pesaran CD test with a standard-normal reference."""
    pc = pairwise_correlations(e)
    cd = _cd_from(pc)
    return CsdTestResult(
        method="Pesaran CD test",
        statistic=cd,
        p_value=float(2.0 * stats.norm.sf(abs(cd))),
        alternative="cross-sectional dependence",
        mean_rho=float(pc.rho.mean()),
        mean_abs_rho=float(np.abs(pc.rho).mean()),
        n_entities=pc.n_entities,
        n_pairs=pc.n_pairs,
    )


def bp_lm(e: np.ndarray) -> CsdTestResult:
    """Breusch–Pagan LM test, χ² with one degree of freedom per pair (suited to N small relative to T)."""
    pc = pairwise_correlations(e)
    lm = float(np.sum(pc.t_ij * pc.rho ** 2))
    return CsdTestResult(
        method="Breusch-Pagan LM test",
        statistic=lm,
        p_value=float(stats.chi2.sf(lm, pc.n_pairs)),
        alternative="cross-sectional dependence",
        mean_rho=float(pc.rho.mean()),
        mean_abs_rho=float(np.abs(pc.rho).mean()),
        n_entities=pc.n_entities,
        n_pairs=pc.n_pairs,
    )


def scaled_lm(e: np.ndarray) -> CsdTestResult:
    """Scaled LM test with a standard-normal reference."""
    pc = pairwise_correlations(e)
    n = pc.n_entities
    stat = float(np.sqrt(1.0 / (n * (n - 1))) * np.sum(pc.t_ij * pc.rho ** 2 - 1.0))
    return CsdTestResult(
        method="Scaled LM test",
        statistic=stat,
        p_value=float(2.0 * stats.norm.sf(abs(stat))),
        alternative="cross-sectional dependence",
        mean_rho=float(pc.rho.mean()),
        mean_abs_rho=float(np.abs(pc.rho).mean()),
        n_entities=n,
        n_pairs=pc.n_pairs,
    )


def pesaran_cd_permutation(e: np.ndarray, draws: int = PERMUTATION_DRAWS, seed: int = 0) -> CsdTestResult:
    """
    Permutation variant of the CD test (experimental).

    Each draw permutes the time order of every entity independently; the
    p-value is (1 + #{|CD*| >= |CD|}) / (draws + 1).
    """
    e = np.asarray(e, dtype=float)
    observed = pesaran_cd(e)
    exceed = 0
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', DiagnosticsWarning)
        for rng in substreams(seed, draws):
            shuffled = np.array([row[rng.permutation(row.size)] for row in e])
            if abs(_cd_from(pairwise_correlations(shuffled))) >= abs(observed.statistic):
                exceed += 1
    return CsdTestResult(
        method="Pesaran CD test (permutation)",
        statistic=observed.statistic,
        p_value=(1.0 + exceed) / (draws + 1.0),
        alternative="cross-sectional dependence",
        mean_rho=observed.mean_rho,
        mean_abs_rho=observed.mean_abs_rho,
        n_entities=observed.n_entities,
        n_pairs=observed.n_pairs,
    )


def csd_battery(e: np.ndarray) -> Tuple[CsdTestResult, CsdTestResult, CsdTestResult]:
    """CD, BP-LM and scaled LM on the same matrix."""
    return pesaran_cd(e), bp_lm(e), scaled_lm(e)


def residual_csd(fit) -> CsdTestResult:
    """Pesaran CD on a fit's residuals mapped back to entity×year."""
    return pesaran_cd(fit.residual_matrix())


def pooled_ols_residuals(y: np.ndarray, x: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Residuals of pooled OLS (with intercept) over the non-missing cells.

    Args:
        y: N×T outcome with NaN for missing cells
        x: Optional N×T×K regressors

    Returns:
        N×T residual matrix, NaN where any input is missing
    """
    y = np.asarray(y, dtype=float)
    n, t = y.shape
    cols = [np.ones(n * t)]
    if x is not None:
        cols.extend(np.asarray(x, dtype=float).reshape(n * t, -1).T)
    design = np.column_stack(cols)
    target = y.ravel()
    ok = ~np.isnan(target) & ~np.isnan(design).any(axis=1)
    coef, *_ = np.linalg.lstsq(design[ok], target[ok], rcond=None)
    out = np.full(n * t, np.nan)
    out[ok] = target[ok] - design[ok] @ coef
    return out.reshape(n, t)
