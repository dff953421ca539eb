"""
Heterogeneous Time Trends: Latent Factor Panel Estimator

y_it = x_it'β + α_i + γ_t + Σ_l λ_il f_l(t) + ε_it, with smooth factors
estimated by principal components of penalized-smoothed residuals.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.linalg as la
from scipy.optimize import minimize_scalar

from ..errors import CollinearityError, ConvergenceError, PanelValidationError
from ..panel.dataset import PanelDataset
from .spec import (
    BaseFit, Dim, Estimator, ModelSpec, balance_sample, gaussian_loglik, information_criteria,
    prepare_sample,
)
from .twfe import collinear_columns, demean

logger = logging.getLogger(__name__)

MAX_ITER = 500
BETA_TOL = 1e-7
MAX_FACTORS = 8
LOG10_KAPPA_BOUNDS = (-3.0, 6.0)


@dataclass(eq=False, kw_only=True)
class FactorFit(BaseFit):
    """Fit with d smooth common factors on top of additive two-way effects."""

    d: int
    factors: np.ndarray
    loadings: np.ndarray
    sigma2: float
    r2: float
    smoothing: float
    iterations: int
    converged: bool
    n_fe: int
    history: List[float] = field(default_factory=list)
    dropped_entities: Tuple[str, ...] = ()

    def fit_statistics(self):
        stats = super().fit_statistics()
        stats.update({'r2': self.r2, 'factors': self.d, 'smoothing': self.smoothing})
        return stats


@dataclass(frozen=True, eq=False)
class FactorSelection:
    """Scree, variance shares and information criteria over candidate factor counts."""

    eigenvalues: np.ndarray
    shares: np.ndarray
    cumulative: np.ndarray
    criteria: pd.DataFrame
    fits: Tuple[FactorFit, ...] = field(repr=False, default=())

    @property
    def best_aic(self) -> int:
        return int(self.criteria.loc[self.criteria['aic'].idxmin(), 'd'])

    @property
    def best_bic(self) -> int:
        return int(self.criteria.loc[self.criteria['bic'].idxmin(), 'd'])


def second_difference(t: int) -> np.ndarray:
    """(T−2)×T second-difference operator."""
    if t < 3:
        return np.zeros((0, t))
    d = np.zeros((t - 2, t))
    for i in range(t - 2):
        d[i, i:i + 3] = (1.0, -2.0, 1.0)
    return d


def smoother(t: int, kappa: float) -> np.ndarray:
    """Symmetric T×T penalized smoother (I + κD'D)^{-1}."""
    d = second_difference(t)
    return la.inv(np.eye(t) + kappa * d.T @ d)


def gcv_smoothing(e: np.ndarray) -> float:
    """Penalty weight minimizing generalized cross-validation over the rows of e."""
    n, t = e.shape
    if t < 3:
        return 0.0

    def gcv(log_kappa: float) -> float:
        h = smoother(t, 10.0 ** log_kappa)
        fitted = e @ h
        dof = 1.0 - np.trace(h) / t
        return float(np.sum((e - fitted) ** 2) / (n * t) / dof ** 2)

    res = minimize_scalar(gcv, bounds=LOG10_KAPPA_BOUNDS, method='bounded')
    return float(10.0 ** res.x)


def roughness(f: np.ndarray) -> float:
    """Σ_t (Δ²f(t))² summed over factor columns."""
    d = second_difference(f.shape[0])
    return float(np.sum((d @ f) ** 2))


def principal_factors(e_smooth: np.ndarray, d: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Top-d factors of e'e with F'F = T·I and loadings Λ = eF/T (so Λ'Λ is diagonal).

    Signs are fixed so the largest-magnitude entry of each factor is positive.
    """
    t = e_smooth.shape[1]
    vals, vecs = la.eigh(e_smooth.T @ e_smooth)
    order = np.argsort(vals)[::-1][:d]
    f = vecs[:, order] * np.sqrt(t)
    for j in range(d):
        if f[np.argmax(np.abs(f[:, j])), j] < 0:
            f[:, j] = -f[:, j]
    lam = e_smooth @ f / t
    return f, lam


def _twoway_center(a: np.ndarray) -> np.ndarray:
    return a - a.mean(axis=1, keepdims=True) - a.mean(axis=0, keepdims=True) + a.mean()


def fit_htt(
    spec: ModelSpec,
    p: PanelDataset,
    d: int,
    smoothing: Optional[float] = None,
    max_iter: int = MAX_ITER,
    tol: float = BETA_TOL,
) -> FactorFit:
    """
    Iterated principal-components estimator with smoothed factors.

    Args:
        spec: Model specification (two-way effects are always kept)
        p: Panel
        d: Number of factors (0 reproduces TWFE on the balanced sample)
        smoothing: Penalty weight κ; None chooses it by GCV on the first pass

    Raises:
        PanelValidationError: d outside [0, min(N, T) − 1] or max_iter below 1
        ConvergenceError: β did not settle within max_iter iterations
    """
    if max_iter < 1:
        raise PanelValidationError(f"max_iter must be at least 1, got {max_iter}")
    sample = prepare_sample(spec, p)
    block = balance_sample(sample)
    n, t = block.shape
    k = len(block.regressors)
    if d < 0 or d > min(n, t) - 1:
        raise PanelValidationError(f"Factor count d={d} outside [0, {min(n, t) - 1}]")

    e_idx, t_idx = block.index_arrays()
    raw = np.column_stack([block.y.ravel(), block.x.reshape(-1, k)])
    dm = demean(raw, e_idx, t_idx, frozenset({Dim.ENTITY, Dim.YEAR}))
    collinear = collinear_columns(raw[:, 1:], dm[:, 1:], block.regressors)
    if collinear:
        raise CollinearityError(f"Model '{spec.name}' has collinear regressors", collinear)
    y = dm[:, 0].reshape(n, t)
    xf = dm[:, 1:]
    xtx_inv = la.inv(xf.T @ xf)

    def regress(target: np.ndarray) -> np.ndarray:
        return xtx_inv @ (xf.T @ target.ravel())

    beta = regress(y)
    f = np.zeros((t, 0))
    lam = np.zeros((n, 0))
    kappa = 0.0 if d == 0 else smoothing
    history: List[float] = []
    iterations = 0
    converged = True
    if d > 0:
        converged = False
        h = None
        for iterations in range(1, max_iter + 1):
            e = y - (xf @ beta).reshape(n, t)
            if h is None:
                kappa = gcv_smoothing(e) if kappa is None else kappa
                h = smoother(t, kappa)
            f, lam = principal_factors(e @ h, d)
            common = _twoway_center(lam @ f.T)
            new_beta = regress(y - common)
            resid = y - common - (xf @ new_beta).reshape(n, t)
            history.append(float(np.sum(resid ** 2)))
            change = float(np.max(np.abs(new_beta - beta)))
            if change < tol:
                beta = new_beta
                converged = True
                break
            previous, beta = beta, new_beta
        if not converged:
            raise ConvergenceError(
                f"HTT '{spec.name}' (d={d}) did not converge in {max_iter} iterations",
                iterates=[previous, beta],
            )

    common = _twoway_center(lam @ f.T) if d > 0 else np.zeros((n, t))
    resid = (y - common).ravel() - xf @ beta
    ssr = float(resid @ resid)
    nobs = n * t
    n_fe = n + t - 1
    dof = max(nobs - k - n_fe - d * (n + t - d), 1)
    sigma2 = ssr / dof
    vcov = sigma2 * xtx_inv
    sst = float(np.sum(y ** 2))
    loglik = gaussian_loglik(ssr, nobs)
    aic, bic = information_criteria(loglik, k + n_fe + 1 + d * (n + t), nobs)

    fit = FactorFit(
        model_name=spec.name,
        estimator=Estimator.HTT,
        dependent=spec.dependent,
        names=block.regressors,
        params=beta,
        vcov=vcov,
        resid=resid,
        nobs=nobs,
        loglik=loglik,
        aic=aic,
        bic=bic,
        entities=block.entities,
        years=block.years,
        entity_idx=e_idx,
        year_idx=t_idx,
        labels=block.labels,
        horizons=block.horizons,
        d=d,
        factors=f,
        loadings=lam,
        sigma2=sigma2,
        r2=1.0 - ssr / sst if sst > 0 else 0.0,
        smoothing=float(kappa or 0.0),
        iterations=iterations,
        converged=converged,
        n_fe=n_fe,
        history=history,
        dropped_entities=block.dropped_entities,
    )
    logger.info(
        f"HTT '{spec.name}': d={d}, kappa={fit.smoothing:.4g}, iterations={iterations}, nobs={nobs}"
    )
    return fit


def select_factors(
    spec: ModelSpec,
    p: PanelDataset,
    d_max: int = MAX_FACTORS,
    smoothing: Optional[float] = None,
    max_iter: int = MAX_ITER,
    tol: float = BETA_TOL,
) -> FactorSelection:
    """
    Fit d = 0..d_max and report the residual scree with AIC/BIC per d.

    The scree is taken from the smoothed residuals of the d = 0 fit.
    """
    if not 0 <= d_max <= MAX_FACTORS:
        raise PanelValidationError(f"d_max must lie in [0, {MAX_FACTORS}], got {d_max}")
    base = fit_htt(spec, p, 0, max_iter=max_iter, tol=tol)
    n, t = len(base.entities), len(base.years)
    e = base.resid.reshape(n, t)
    kappa = gcv_smoothing(e) if smoothing is None else smoothing
    e_smooth = e @ smoother(t, kappa)
    vals = np.sort(np.clip(la.eigvalsh(e_smooth.T @ e_smooth / (n * t)), 0.0, None))[::-1]
    total = vals.sum()
    shares = vals / total if total > 0 else np.zeros_like(vals)

    fits = [base]
    for d in range(1, min(d_max, min(n, t) - 1) + 1):
        fits.append(fit_htt(spec, p, d, smoothing=kappa, max_iter=max_iter, tol=tol))
    criteria = pd.DataFrame({
        'd': [f.d for f in fits],
        'loglik': [f.loglik for f in fits],
        'aic': [f.aic for f in fits],
        'bic': [f.bic for f in fits],
    })
    selection = FactorSelection(vals, shares, np.cumsum(shares), criteria, tuple(fits))
    logger.info(f"Factor selection '{spec.name}': AIC picks d={selection.best_aic}, BIC picks d={selection.best_bic}")
    return selection
