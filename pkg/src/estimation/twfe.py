"""
Two-way Fixed-Effects Least Squares
"""

import logging
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.linalg as la

from ..errors import CollinearityError, ConvergenceError, EstimationError, PanelValidationError
from ..panel.dataset import Column, PanelDataset
from .covariance import cluster_vcov
from .inference import pvalues
from .spec import (
    BOTH_DIMS, BaseFit, Dim, Estimator, FitResult, ModelSpec, gaussian_loglik, information_criteria,
    prepare_sample,
)

logger = logging.getLogger(__name__)

DEMEAN_TOL = 1e-10
DEMEAN_MAX_SWEEPS = 10_000
COLLINEAR_TOL = 1e-9


def _group_means(x: np.ndarray, codes: np.ndarray, n_groups: int) -> np.ndarray:
    counts = np.bincount(codes, minlength=n_groups).astype(float)
    counts[counts == 0] = 1.0
    sums = np.zeros((n_groups, x.shape[1]))
    np.add.at(sums, codes, x)
    return sums / counts[:, None]


def demean(
    data: np.ndarray,
    entity_idx: np.ndarray,
    year_idx: np.ndarray,
    fe_dims: FrozenSet[Dim] = BOTH_DIMS,
    tol: float = DEMEAN_TOL,
    max_sweeps: int = DEMEAN_MAX_SWEEPS,
) -> np.ndarray:
    """
    Sweep out entity and/or year means from long rows by alternating projections.

    A sweep subtracts entity means then year means. Iteration stops when the
    largest cell change of a sweep falls below `tol` (relative to the column
    scale). With a single dimension one pass is exact.

    Raises:
        PanelValidationError: empty fe_dims
        ConvergenceError: no convergence within max_sweeps
    """
    if not fe_dims:
        raise PanelValidationError("fe_dims must name at least one dimension")
    x = np.array(data, dtype=float, copy=True)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        return x
    e_codes = np.unique(entity_idx, return_inverse=True)[1]
    y_codes = np.unique(year_idx, return_inverse=True)[1]
    n_e = int(e_codes.max()) + 1
    n_y = int(y_codes.max()) + 1

    if Dim.YEAR not in fe_dims:
        return x - _group_means(x, e_codes, n_e)[e_codes]
    if Dim.ENTITY not in fe_dims:
        return x - _group_means(x, y_codes, n_y)[y_codes]

    scale = np.maximum(1.0, np.abs(x).max(axis=0))
    for sweep in range(1, max_sweeps + 1):
        start = x.copy()
        x -= _group_means(x, e_codes, n_e)[e_codes]
        x -= _group_means(x, y_codes, n_y)[y_codes]
        change = np.max(np.abs(x - start) / scale)
        if change < tol:
            logger.debug(f"Two-way demeaning converged in {sweep} sweeps")
            return x
    raise ConvergenceError(f"Two-way demeaning did not converge in {max_sweeps} sweeps")


def within_transform(
    p: PanelDataset,
    columns: Sequence[str],
    fe_dims: FrozenSet[Dim] = BOTH_DIMS,
    tol: float = DEMEAN_TOL,
    max_sweeps: int = DEMEAN_MAX_SWEEPS,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Listwise-delete the named columns and demean the surviving rows.

    Returns:
        (centered matrix, entity_idx, year_idx)
    """
    rows = p.long_rows(columns)
    centered = demean(rows.data, rows.entity_idx, rows.year_idx, fe_dims, tol, max_sweeps)
    return centered, rows.entity_idx, rows.year_idx


def collinear_columns(x_raw: np.ndarray, x_dm: np.ndarray, names: Sequence[str]) -> List[str]:
    """Columns absorbed by the fixed effects or linearly dependent on earlier ones."""
    raw_scale = np.linalg.norm(x_raw - x_raw.mean(axis=0), axis=0)
    dm_norm = np.linalg.norm(x_dm, axis=0)
    absorbed = [
        names[j] for j in range(len(names))
        if dm_norm[j] <= COLLINEAR_TOL * max(1.0, raw_scale[j])
    ]
    if absorbed:
        return absorbed
    _, r, piv = la.qr(x_dm / dm_norm, mode='economic', pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > COLLINEAR_TOL * 1e3 * diag[0]))
    return sorted(names[j] for j in piv[rank:])


def fit_twfe(
    spec: ModelSpec,
    p: PanelDataset,
    pvalue_dist: str = "normal",
    cluster_df: str = "conventional",
    tol: float = DEMEAN_TOL,
    max_sweeps: int = DEMEAN_MAX_SWEEPS,
) -> FitResult:
    """
    Two-way fixed-effects OLS on FE-demeaned data.

    Args:
        spec: Model specification
        p: Panel holding every column the spec references
        pvalue_dist: "normal" or "t" (dof = smallest cluster count − 1)
        cluster_df: "conventional" (per-dimension G) or "min" (smallest G)

    Returns:
        FitResult with iid and clustered covariance

    Raises:
        PanelValidationError: too few surviving rows
        CollinearityError: columns absorbed by FE or linearly dependent
    """
    sample = prepare_sample(spec, p)
    rows = sample.rows
    y = sample.y
    x = sample.x
    names = sample.regressors
    n, k = x.shape
    n_ent = len(np.unique(rows.entity_idx))
    n_yr = len(np.unique(rows.year_idx))
    n_fe = (n_ent if Dim.ENTITY in spec.fe_dims else 0) + (n_yr if Dim.YEAR in spec.fe_dims else 0)
    if len(spec.fe_dims) == 2:
        n_fe -= 1
    if n < k + n_ent + n_yr:
        raise PanelValidationError(
            f"Model '{spec.name}': {n} rows cannot identify {k} slopes and {n_ent}+{n_yr} fixed effects"
        )

    dm = demean(np.column_stack([y, x]), rows.entity_idx, rows.year_idx, spec.fe_dims, tol, max_sweeps)
    y_dm, x_dm = dm[:, 0], dm[:, 1:]

    collinear = collinear_columns(x, x_dm, names)
    if collinear:
        raise CollinearityError(f"Model '{spec.name}' has collinear regressors", collinear)

    xtx = x_dm.T @ x_dm
    bread = la.inv(xtx)
    bread = (bread + bread.T) / 2.0
    beta = bread @ (x_dm.T @ y_dm)
    resid = y_dm - x_dm @ beta
    ssr = float(resid @ resid)
    df_resid = max(n - k - n_fe, 1)
    vcov_iid = bread * ssr / df_resid

    sst_within = float(y_dm @ y_dm)
    sst_total = float(np.sum((y - y.mean()) ** 2))
    within_r2 = 1.0 - ssr / sst_within if sst_within > 0 else 0.0
    r2 = 1.0 - ssr / sst_total if sst_total > 0 else 0.0
    loglik = gaussian_loglik(ssr, n)
    aic, bic = information_criteria(loglik, k + n_fe + 1, n)

    fit = FitResult(
        model_name=spec.name,
        estimator=Estimator.TWFE,
        dependent=spec.dependent,
        names=names,
        params=beta,
        vcov=vcov_iid,
        resid=resid,
        nobs=n,
        loglik=loglik,
        aic=aic,
        bic=bic,
        entities=sample.panel.entities,
        years=sample.panel.years,
        entity_idx=rows.entity_idx,
        year_idx=rows.year_idx,
        labels=sample.labels,
        horizons=sample.horizons,
        vcov_iid=vcov_iid,
        vcov_clustered=None,
        cluster_dims=spec.cluster_dims,
        r2=r2,
        within_r2=min(max(within_r2, 0.0), 1.0),
        df_resid=df_resid,
        n_fe=n_fe,
        design=x_dm,
        bread=bread,
        pvalue_dist=pvalue_dist,
    )
    if spec.cluster_dims:
        fit.vcov_clustered = cluster_vcov(fit, spec.cluster_dims, cluster_df=cluster_df)
        fit.vcov = fit.vcov_clustered
        if pvalue_dist == "t":
            counts = []
            if Dim.ENTITY in spec.cluster_dims:
                counts.append(n_ent)
            if Dim.YEAR in spec.cluster_dims:
                counts.append(n_yr)
            fit.pvalue_dof = min(counts) - 1
    elif pvalue_dist == "t":
        fit.pvalue_dof = df_resid

    logger.info(
        f"TWFE '{spec.name}': nobs={n}, K={k}, entities={n_ent}, years={n_yr}, within R2={fit.within_r2:.5f}"
    )
    return fit


def lsdv_fit(spec: ModelSpec, p: PanelDataset) -> Tuple[np.ndarray, np.ndarray]:
    """
    Dummy-variable least squares with explicit entity and year indicators.

    Dense normal equations; intended as a check on small panels.

    Returns:
        (slope coefficients, residuals)
    """
    sample = prepare_sample(spec, p)
    rows = sample.rows
    blocks = [sample.x]
    e_codes = np.unique(rows.entity_idx, return_inverse=True)[1]
    y_codes = np.unique(rows.year_idx, return_inverse=True)[1]
    if Dim.ENTITY in spec.fe_dims:
        blocks.append(np.eye(e_codes.max() + 1)[e_codes])
    if Dim.YEAR in spec.fe_dims:
        years = np.eye(y_codes.max() + 1)[y_codes]
        blocks.append(years[:, 1:] if Dim.ENTITY in spec.fe_dims else years)
    design = np.column_stack(blocks)
    coef, *_ = np.linalg.lstsq(design, sample.y, rcond=None)
    k = sample.x.shape[1]
    return coef[:k], sample.y - design @ coef


def make_interaction(
    p: PanelDataset,
    var: str,
    factor: Union[str, Mapping[str, Any]],
    factor_name: Optional[str] = None,
) -> List[Column]:
    """
    Product columns of `var` with a binary or categorical factor.

    `factor` is either a panel column name or an entity→level mapping. A
    binary 0/1 factor yields one column `var_x_factor`; any other factor
    yields one column per level, named `{factor}{level}_x_{var}`, whose sum
    equals `var`.

    Raises:
        PanelValidationError: factor with fewer than two levels
    """
    src = p.get(var)
    if isinstance(factor, str):
        fcol = p.get(factor)
        f_values, f_mask = fcol.values, fcol.mask
        name = factor_name or factor
        levels = np.unique(f_values[~f_mask])
    else:
        name = factor_name or "group"
        f_mask = np.ones(src.values.shape, dtype=bool)
        f_values = np.empty(src.values.shape, dtype=object)
        for i, entity in enumerate(p.entities):
            if entity in factor and factor[entity] is not None:
                f_values[i, :] = factor[entity]
                f_mask[i, :] = False
        levels = np.array(sorted({v for v in f_values[~f_mask]}, key=str), dtype=object)

    if len(levels) < 2:
        raise PanelValidationError(f"Interaction factor '{name}' has fewer than two levels")
    mask = src.mask | f_mask
    if isinstance(factor, str) and set(np.asarray(levels, dtype=float)) <= {0.0, 1.0}:
        values = np.where(mask, 0.0, src.values * f_values)
        return [Column(f"{var}_x_{name}", values, mask)]

    columns = []
    for level in levels:
        hit = np.zeros(src.values.shape, dtype=bool)
        hit[~f_mask] = f_values[~f_mask] == level
        values = np.where(mask, 0.0, src.values * hit)
        level_str = f"{level:g}" if isinstance(level, (float, np.floating)) else str(level)
        columns.append(Column(f"{name}{level_str}_x_{var}", values, mask))
    return columns


def linear_combination(
    fit: BaseFit,
    weights: Union[Sequence[float], Mapping[str, float]],
) -> Tuple[float, float, float]:
    """
    Wald estimate of c'β with SE √(c'Vc) and a two-sided normal p-value.

    `weights` may be a full-length vector or a name→weight mapping.
    """
    if isinstance(weights, Mapping):
        unknown = [n for n in weights if n not in fit.names]
        if unknown:
            raise EstimationError(f"Unknown coefficients in linear combination: {unknown}")
        c = np.array([float(weights.get(n, 0.0)) for n in fit.names])
    else:
        c = np.asarray(weights, dtype=float)
        if c.shape != (fit.k,):
            raise EstimationError(f"Linear combination needs {fit.k} weights, got {c.shape[0]}")
    estimate = float(c @ fit.params[: fit.k])
    variance = float(c @ fit.vcov[: fit.k, : fit.k] @ c)
    se = float(np.sqrt(max(variance, 0.0)))
    p = float(pvalues(np.array([estimate]), np.array([se]))[0]) if se > 0 else float('nan')
    return estimate, se, p


def lincom_table(fit: BaseFit, combos: Mapping[str, Mapping[str, float]]) -> pd.DataFrame:
    """Named linear combinations as a frame (name, estimate, std_error, p_value)."""
    records: List[Dict[str, Any]] = []
    for label, weights in combos.items():
        est, se, p = linear_combination(fit, weights)
        records.append({'name': label, 'estimate': est, 'std_error': se, 'p_value': p})
    return pd.DataFrame.from_records(records, columns=['name', 'estimate', 'std_error', 'p_value'])
