"""
Maximum-likelihood Spatial Panel Estimators (SLM, SEM, SARAR)

All three estimators work on FE-demeaned balanced blocks, so the spatial
operator acts on each year's cross-section and the Jacobian term of the
likelihood is T·ln|I − ρW|.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Tuple

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize, minimize_scalar
from scipy.sparse.linalg import splu
from statsmodels.tools.numdiff import approx_hess3

from ..errors import CollinearityError, EstimationError, PanelValidationError
from ..panel.dataset import PanelDataset
from ..weights.spatial_weights import SpatialWeights, align_weights
from .covariance import psd_floor
from .spec import (
    BaseFit, Dim, Estimator, ModelSpec, balance_sample, information_criteria, prepare_sample,
)
from .twfe import collinear_columns, demean

logger = logging.getLogger(__name__)

OPTIMIZER_TOL = 1e-8
BOUNDARY_FRACTION = 1e-4
INTERIOR_MARGIN = 1e-7
NEWTON_MAX_STEPS = 50
AUDIT_POINTS = 1000
RESTART_GRID = 5


@dataclass(eq=False, kw_only=True)
class SpatialFit(BaseFit):
    """
    Spatial ML fit.

    `vcov` covers `param_names`: the slopes, the free spatial parameters and σ².
    `profile` evaluates the concentrated log-likelihood in the free spatial
    parameters (keywords `rho`, `delta`).
    """

    rho: Optional[float]
    delta: Optional[float]
    sigma2: float
    param_names: Tuple[str, ...]
    n_fe: int
    weights: SpatialWeights = field(repr=False)
    profile: Callable[..., float] = field(repr=False)
    fixed: Mapping[str, float] = field(default_factory=dict)

    def param_se(self, name: str) -> float:
        if name not in self.param_names:
            return float('nan')
        i = self.param_names.index(name)
        return float(np.sqrt(max(self.vcov[i, i], 0.0)))

    @property
    def rho_se(self) -> float:
        return self.param_se('rho')

    @property
    def delta_se(self) -> float:
        return self.param_se('delta')

    def fit_statistics(self) -> Dict[str, float]:
        stats = super().fit_statistics()
        stats['sigma2'] = self.sigma2
        if self.rho is not None:
            stats['rho'] = self.rho
        if self.delta is not None:
            stats['delta'] = self.delta
        return stats


@dataclass(frozen=True, eq=False)
class SpatialData:
    """Demeaned balanced block with its spatial lags precomputed."""

    entities: Tuple[str, ...]
    years: Tuple[int, ...]
    names: Tuple[str, ...]
    labels: Mapping[str, str]
    horizons: Mapping[str, int]
    w: SpatialWeights
    y: np.ndarray
    x: np.ndarray
    wy: np.ndarray
    wx: np.ndarray
    wwy: np.ndarray
    n_fe: int

    @property
    def n_entities(self) -> int:
        return self.y.shape[0]

    @property
    def n_years(self) -> int:
        return self.y.shape[1]

    @property
    def nobs(self) -> int:
        return self.y.size

    @property
    def k(self) -> int:
        return self.x.shape[2]

    def flat_x(self, x: Optional[np.ndarray] = None) -> np.ndarray:
        x = self.x if x is None else x
        return x.reshape(-1, self.k)


def _lag_block(w: SpatialWeights, a: np.ndarray) -> np.ndarray:
    """Apply W to the entity axis of an N×T or N×T×K array."""
    shape = a.shape
    return np.asarray(w.spmv(a.reshape(shape[0], -1))).reshape(shape)


def prepare_spatial(spec: ModelSpec, p: PanelDataset, w: SpatialWeights) -> SpatialData:
    """
    Balance, align W to the sample and demean.

    Raises:
        PanelValidationError: sample entities missing from W
        CollinearityError: regressors absorbed by the fixed effects
    """
    sample = prepare_sample(spec, p)
    block = balance_sample(sample)
    w_s = align_weights(w, block.entities)
    n, t = block.shape
    k = len(block.regressors)
    e_idx, t_idx = block.index_arrays()
    raw = np.column_stack([block.y.ravel(), block.x.reshape(-1, k)])
    dm = demean(raw, e_idx, t_idx, spec.fe_dims)
    collinear = collinear_columns(raw[:, 1:], dm[:, 1:], block.regressors)
    if collinear:
        raise CollinearityError(f"Model '{spec.name}' has collinear regressors", collinear)
    y = dm[:, 0].reshape(n, t)
    x = dm[:, 1:].reshape(n, t, k)
    n_fe = (n if Dim.ENTITY in spec.fe_dims else 0) + (t if Dim.YEAR in spec.fe_dims else 0)
    if len(spec.fe_dims) == 2:
        n_fe -= 1
    wy = _lag_block(w_s, y)
    return SpatialData(
        entities=block.entities,
        years=block.years,
        names=block.regressors,
        labels=block.labels,
        horizons=block.horizons,
        w=w_s,
        y=y,
        x=x,
        wy=wy,
        wx=_lag_block(w_s, x),
        wwy=_lag_block(w_s, wy),
        n_fe=n_fe,
    )


def _ols(x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    beta = la.solve(x.T @ x, x.T @ y, assume_a='pos')
    return beta, y - x @ beta


def _concentrated(ssr: float, n: int) -> float:
    return -0.5 * n * (np.log(2.0 * np.pi * ssr / n) + 1.0)


def _check_interior(name: str, value: float, interval: Tuple[float, float]) -> None:
    lo, hi = interval
    if not lo < value < hi:
        raise PanelValidationError(f"{name}={value} outside the feasible interval ({lo:.4f}, {hi:.4f})")


def _at_boundary(value: float, interval: Tuple[float, float]) -> bool:
    lo, hi = interval
    margin = BOUNDARY_FRACTION * (hi - lo)
    return value - lo < margin or hi - value < margin


def _search_interval(w: SpatialWeights) -> Tuple[float, float]:
    lo, hi = w.feasible_interval()
    return lo + INTERIOR_MARGIN, min(hi, 1.0) - INTERIOR_MARGIN


def maximize_scalar(
    f: Callable[[float], float],
    interval: Tuple[float, float],
    tol: float = OPTIMIZER_TOL,
    derivatives: Optional[Callable[[float], Tuple[float, float]]] = None,
) -> float:
    """
    Maximize a concave-ish profile on an interval: bounded golden-section
    search followed by Newton polishing.
    """
    lo, hi = interval
    res = minimize_scalar(lambda r: -f(r), bounds=(lo, hi), method='bounded', options={'xatol': tol})
    r = float(res.x)

    def numeric(point: float) -> Tuple[float, float]:
        h = 1e-5
        f0, fp, fm = f(point), f(point + h), f(point - h)
        return (fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (h * h)

    deriv = derivatives or numeric
    current = f(r)
    for _ in range(NEWTON_MAX_STEPS):
        g, h = deriv(r)
        if not np.isfinite(h) or h >= 0:
            break
        step = -g / h
        candidate = min(max(r + step, lo), hi)
        value = f(candidate)
        if value < current - 1e-12 * abs(current):
            break
        r, current = candidate, value
        if abs(step) < tol:
            break
    return r


def fit_slm(
    spec: ModelSpec,
    p: PanelDataset,
    w: SpatialWeights,
    fix_rho: Optional[float] = None,
    tol: float = OPTIMIZER_TOL,
) -> SpatialFit:
    """
    Spatial lag model y = ρWy + Xβ + α_i + γ_t + ε by concentrated ML.

    Raises:
        EstimationError: ρ̂ at the boundary of the feasible interval
    """
    d = prepare_spatial(spec, p, w)
    n, t = d.nobs, d.n_years
    x = d.flat_x()
    b0, e0 = _ols(x, d.y.ravel())
    b1, e1 = _ols(x, d.wy.ravel())
    e00, e01, e11 = float(e0 @ e0), float(e0 @ e1), float(e1 @ e1)

    def profile(rho: float) -> float:
        ssr = e00 - 2.0 * rho * e01 + rho * rho * e11
        return _concentrated(ssr, n) + t * d.w.logdet(rho)

    def derivatives(rho: float) -> Tuple[float, float]:
        s2 = (e00 - 2.0 * rho * e01 + rho * rho * e11) / n
        ds2 = 2.0 * (rho * e11 - e01) / n
        dds2 = 2.0 * e11 / n
        ld1, ld2 = d.w.logdet_derivatives(rho)
        g = -0.5 * n * ds2 / s2 + t * ld1
        h = -0.5 * n * (dds2 / s2 - (ds2 / s2) ** 2) + t * ld2
        return g, h

    interval = d.w.feasible_interval()
    if fix_rho is None:
        rho = maximize_scalar(profile, _search_interval(d.w), tol, derivatives)
        if _at_boundary(rho, interval):
            raise EstimationError(f"SLM '{spec.name}': rho={rho:.6f} converged to the boundary of {interval}")
    else:
        _check_interior('rho', fix_rho, interval)
        rho = float(fix_rho)

    beta = b0 - rho * b1
    resid = e0 - rho * e1
    sigma2 = float(resid @ resid) / n
    loglik = profile(rho)

    k = d.k
    ainv = splu(d.w.operator(rho)).solve(np.eye(d.n_entities))
    wa = np.asarray(d.w.matrix @ ainv)
    tr1 = t * float(np.trace(wa))
    tr2 = t * float(np.sum(wa * wa.T))
    tr3 = t * float(np.sum(wa * wa))
    wpredy = (wa @ (x @ beta).reshape(d.n_entities, t)).ravel()
    xtx = x.T @ x
    names = d.names + (('rho',) if fix_rho is None else ()) + ('sigma2',)
    if fix_rho is None:
        info = np.zeros((k + 2, k + 2))
        info[:k, :k] = xtx / sigma2
        info[:k, k] = info[k, :k] = x.T @ wpredy / sigma2
        info[k, k] = tr2 + tr3 + float(wpredy @ wpredy) / sigma2
        info[k, k + 1] = info[k + 1, k] = tr1 / sigma2
        info[k + 1, k + 1] = n / (2.0 * sigma2 ** 2)
    else:
        info = np.zeros((k + 1, k + 1))
        info[:k, :k] = xtx / sigma2
        info[k, k] = n / (2.0 * sigma2 ** 2)
    vcov = psd_floor(la.inv(info))

    n_spatial = 1 if fix_rho is None else 0
    aic, bic = information_criteria(loglik, k + d.n_fe + n_spatial + 1, n)
    fit = _build_fit(
        spec, d, Estimator.SLM, beta, resid, vcov, names, loglik, aic, bic, sigma2,
        rho=rho, delta=None, profile=lambda rho: profile(rho),
        fixed={} if fix_rho is None else {'rho': rho},
    )
    logger.info(f"SLM '{spec.name}': rho={rho:.4f}, logL={loglik:.1f}, nobs={n}")
    return fit


def _sem_parts(d: SpatialData, delta: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    ys = (d.y - delta * d.wy).ravel()
    xs = d.flat_x(d.x - delta * d.wx)
    beta, resid = _ols(xs, ys)
    return beta, resid, xs


def fit_sem(
    spec: ModelSpec,
    p: PanelDataset,
    w: SpatialWeights,
    fix_delta: Optional[float] = None,
    tol: float = OPTIMIZER_TOL,
) -> SpatialFit:
    """
    Spatial error model u = δWu + ε by concentrated ML (GLS on (I − δW)-filtered data).

    Raises:
        EstimationError: δ̂ at the boundary of the feasible interval
    """
    d = prepare_spatial(spec, p, w)
    n, t = d.nobs, d.n_years

    def profile(delta: float) -> float:
        _, resid, _ = _sem_parts(d, delta)
        return _concentrated(float(resid @ resid), n) + t * d.w.logdet(delta)

    interval = d.w.feasible_interval()
    if fix_delta is None:
        delta = maximize_scalar(profile, _search_interval(d.w), tol)
        if _at_boundary(delta, interval):
            raise EstimationError(
                f"SEM '{spec.name}': delta={delta:.6f} converged to the boundary of {interval}"
            )
    else:
        _check_interior('delta', fix_delta, interval)
        delta = float(fix_delta)

    beta, resid, xs = _sem_parts(d, delta)
    sigma2 = float(resid @ resid) / n
    loglik = profile(delta)

    k = d.k
    binv = splu(d.w.operator(delta)).solve(np.eye(d.n_entities))
    wb = np.asarray(d.w.matrix @ binv)
    v_beta = la.inv(xs.T @ xs / sigma2)
    if fix_delta is None:
        tr1 = t * float(np.trace(wb))
        info = np.array([
            [t * float(np.sum(wb * wb.T)) + t * float(np.sum(wb * wb)), tr1 / sigma2],
            [tr1 / sigma2, n / (2.0 * sigma2 ** 2)],
        ])
        v_rest = la.inv(info)
        names = d.names + ('delta', 'sigma2')
    else:
        v_rest = np.array([[2.0 * sigma2 ** 2 / n]])
        names = d.names + ('sigma2',)
    vcov = psd_floor(la.block_diag(v_beta, v_rest))

    n_spatial = 1 if fix_delta is None else 0
    aic, bic = information_criteria(loglik, k + d.n_fe + n_spatial + 1, n)
    fit = _build_fit(
        spec, d, Estimator.SEM, beta, resid, vcov, names, loglik, aic, bic, sigma2,
        rho=None, delta=delta, profile=lambda delta: profile(delta),
        fixed={} if fix_delta is None else {'delta': delta},
    )
    logger.info(f"SEM '{spec.name}': delta={delta:.4f}, logL={loglik:.1f}, nobs={n}")
    return fit


def _sarar_parts(d: SpatialData, rho: float, delta: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    ys = (d.y - (rho + delta) * d.wy + rho * delta * d.wwy).ravel()
    xs = d.flat_x(d.x - delta * d.wx)
    beta, resid = _ols(xs, ys)
    return beta, resid, xs


def fit_sarar(
    spec: ModelSpec,
    p: PanelDataset,
    w: SpatialWeights,
    fix_rho: Optional[float] = None,
    fix_delta: Optional[float] = None,
    tol: float = OPTIMIZER_TOL,
    restart_grid: int = RESTART_GRID,
) -> SpatialFit:
    """
    Combined lag and error model by 2-D concentrated ML.

    Nelder–Mead is restarted from a restart_grid×restart_grid lattice over the
    feasible box and the best interior optimum is kept. Fixing one parameter
    reduces to a 1-D search; the covariance comes from a numerical Hessian
    of the full log-likelihood.

    Raises:
        EstimationError: every restart converged to the boundary
    """
    d = prepare_spatial(spec, p, w)
    n, t = d.nobs, d.n_years
    interval = d.w.feasible_interval()
    lo, hi = _search_interval(d.w)

    def profile(rho: float, delta: float) -> float:
        if not (lo <= rho <= hi and lo <= delta <= hi):
            return -np.inf
        _, resid, _ = _sarar_parts(d, rho, delta)
        return _concentrated(float(resid @ resid), n) + t * (d.w.logdet(rho) + d.w.logdet(delta))

    if fix_rho is not None:
        _check_interior('rho', fix_rho, interval)
    if fix_delta is not None:
        _check_interior('delta', fix_delta, interval)

    if fix_rho is not None and fix_delta is not None:
        rho, delta = float(fix_rho), float(fix_delta)
    elif fix_rho is not None:
        rho = float(fix_rho)
        delta = maximize_scalar(lambda v: profile(rho, v), (lo, hi), tol)
        if _at_boundary(delta, interval):
            raise EstimationError(f"SARAR '{spec.name}': delta converged to the boundary")
    elif fix_delta is not None:
        delta = float(fix_delta)
        rho = maximize_scalar(lambda v: profile(v, delta), (lo, hi), tol)
        if _at_boundary(rho, interval):
            raise EstimationError(f"SARAR '{spec.name}': rho converged to the boundary")
    else:
        rho, delta = _sarar_search(profile, interval, (lo, hi), tol, restart_grid, spec.name)

    beta, resid, xs = _sarar_parts(d, rho, delta)
    sigma2 = float(resid @ resid) / n
    loglik = profile(rho, delta)

    free = [name for name, fixed in (('rho', fix_rho), ('delta', fix_delta)) if fixed is None]
    k = d.k

    def full_loglik(theta: np.ndarray) -> float:
        b = theta[:k]
        values = dict(zip(free, theta[k:k + len(free)]))
        r = values.get('rho', rho)
        dl = values.get('delta', delta)
        s2 = theta[-1]
        if s2 <= 0:
            return -1e300
        ys = (d.y - (r + dl) * d.wy + r * dl * d.wwy).ravel()
        e = ys - d.flat_x(d.x - dl * d.wx) @ b
        jac = t * (d.w.logdet(r) + d.w.logdet(dl))
        return -0.5 * n * np.log(2.0 * np.pi * s2) - float(e @ e) / (2.0 * s2) + jac

    theta = np.concatenate([beta, [v for name, v in (('rho', rho), ('delta', delta)) if name in free], [sigma2]])
    hess = approx_hess3(theta, full_loglik)
    try:
        vcov = psd_floor(la.inv(-hess))
    except la.LinAlgError as exc:
        raise EstimationError(f"SARAR '{spec.name}': information matrix is singular") from exc
    names = d.names + tuple(free) + ('sigma2',)

    aic, bic = information_criteria(loglik, k + d.n_fe + len(free) + 1, n)
    fixed = {}
    if fix_rho is not None:
        fixed['rho'] = rho
    if fix_delta is not None:
        fixed['delta'] = delta
    fit = _build_fit(
        spec, d, Estimator.SARAR, beta, resid, vcov, names, loglik, aic, bic, sigma2,
        rho=rho, delta=delta, profile=lambda rho, delta: profile(rho, delta), fixed=fixed,
    )
    logger.info(f"SARAR '{spec.name}': rho={rho:.4f}, delta={delta:.4f}, logL={loglik:.1f}, nobs={n}")
    return fit


def _sarar_search(
    profile: Callable[[float, float], float],
    interval: Tuple[float, float],
    box: Tuple[float, float],
    tol: float,
    restart_grid: int,
    name: str,
) -> Tuple[float, float]:
    lo, hi = box
    starts = lo + (hi - lo) * np.arange(1, restart_grid + 1) / (restart_grid + 1)
    candidates: List[Tuple[float, float, float]] = []
    for r0 in starts:
        for d0 in starts:
            res = minimize(
                lambda v: -profile(v[0], v[1]),
                x0=np.array([r0, d0]),
                method='Nelder-Mead',
                options={'xatol': tol, 'fatol': 1e-10, 'maxiter': 4000},
            )
            r, dl = float(res.x[0]), float(res.x[1])
            value = profile(r, dl)
            if np.isfinite(value) and not (_at_boundary(r, interval) or _at_boundary(dl, interval)):
                candidates.append((value, r, dl))
    if not candidates:
        raise EstimationError(f"SARAR '{name}': every restart converged to the boundary")
    value, rho, delta = max(candidates)
    logger.debug(f"SARAR '{name}': {len(candidates)} interior restarts, best logL={value:.3f}")
    return rho, delta


def _build_fit(
    spec: ModelSpec,
    d: SpatialData,
    estimator: Estimator,
    beta: np.ndarray,
    resid: np.ndarray,
    vcov: np.ndarray,
    names: Tuple[str, ...],
    loglik: float,
    aic: float,
    bic: float,
    sigma2: float,
    rho: Optional[float],
    delta: Optional[float],
    profile: Callable[..., float],
    fixed: Mapping[str, float],
) -> SpatialFit:
    e_idx = np.repeat(np.arange(d.n_entities), d.n_years)
    t_idx = np.tile(np.arange(d.n_years), d.n_entities)
    if not sigma2 > 0:
        raise EstimationError(f"'{spec.name}': residual variance is zero")
    return SpatialFit(
        model_name=spec.name,
        estimator=estimator,
        dependent=spec.dependent,
        names=d.names,
        params=beta,
        vcov=vcov,
        resid=resid,
        nobs=d.nobs,
        loglik=loglik,
        aic=aic,
        bic=bic,
        entities=d.entities,
        years=d.years,
        entity_idx=e_idx,
        year_idx=t_idx,
        labels=d.labels,
        horizons=d.horizons,
        rho=rho,
        delta=delta,
        sigma2=sigma2,
        param_names=names,
        n_fe=d.n_fe,
        weights=d.w,
        profile=profile,
        fixed=dict(fixed),
    )


@dataclass(frozen=True)
class LikelihoodAudit:
    """Post-hoc grid check that no grid point beats the reported optimum."""

    fitted_loglik: float
    best_grid_loglik: float
    best_grid_point: Tuple[float, ...]
    n_points: int

    @property
    def passed(self) -> bool:
        return self.best_grid_loglik <= self.fitted_loglik + 1e-8 * max(1.0, abs(self.fitted_loglik))


def audit_likelihood(fit: SpatialFit, n_points: int = AUDIT_POINTS) -> LikelihoodAudit:
    """
    Evaluate the concentrated likelihood on a grid over the feasible interval.

    For SARAR fits the grid runs along each axis with the other parameter held
    at its estimate.
    """
    lo, hi = _search_interval(fit.weights)
    grid = np.linspace(lo, hi, n_points)
    best = (-np.inf, ())
    if fit.estimator == Estimator.SLM:
        points = [((g,), fit.profile(g)) for g in grid]
    elif fit.estimator == Estimator.SEM:
        points = [((g,), fit.profile(g)) for g in grid]
    else:
        points = [((g, fit.delta), fit.profile(g, fit.delta)) for g in grid]
        points += [((fit.rho, g), fit.profile(fit.rho, g)) for g in grid]
    for point, value in points:
        if value > best[0]:
            best = (value, point)
    audit = LikelihoodAudit(fit.loglik, float(best[0]), tuple(float(v) for v in best[1]), len(points))
    if not audit.passed:
        logger.warning(
            f"Likelihood audit failed for '{fit.model_name}': grid {audit.best_grid_loglik:.4f} "
            f"> fitted {audit.fitted_loglik:.4f} at {audit.best_grid_point}"
        )
    return audit
