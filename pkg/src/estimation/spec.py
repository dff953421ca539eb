"""
Model Specification and Fit Result Types
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, FrozenSet, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from ..errors import PanelValidationError
from ..panel.dataset import LongRows, PanelDataset
from .inference import critical_value, pvalues, signif_code

logger = logging.getLogger(__name__)


class Dim(Enum):
    """Panel dimensions usable for fixed effects and clustering."""
    ENTITY = "entity"
    YEAR = "year"


class Estimator(Enum):
    """Estimators selectable from a spec file."""
    TWFE = "twfe"
    SLM = "slm"
    SEM = "sem"
    SARAR = "sarar"
    HTT = "htt"


BOTH_DIMS = frozenset({Dim.ENTITY, Dim.YEAR})


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """
    Declarative description of one regression over resolved panel columns.

    `grouped` lists regressors whose slopes vary by the entity groups in
    `group_var`; they are replaced by one product column per group level.
    """

    dependent: str
    regressors: Tuple[str, ...]
    fe_dims: FrozenSet[Dim] = BOTH_DIMS
    cluster_dims: FrozenSet[Dim] = BOTH_DIMS
    sample: Optional[Callable[[str], bool]] = None
    group_var: Optional[Mapping[str, Any]] = None
    grouped: Tuple[str, ...] = ()
    name: str = "model"
    labels: Mapping[str, str] = field(default_factory=dict)
    horizons: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'regressors', tuple(self.regressors))
        object.__setattr__(self, 'grouped', tuple(self.grouped))
        object.__setattr__(self, 'fe_dims', frozenset(self.fe_dims))
        object.__setattr__(self, 'cluster_dims', frozenset(self.cluster_dims))
        if self.dependent in self.regressors:
            raise PanelValidationError(f"Dependent variable '{self.dependent}' is also a regressor")
        if not self.regressors:
            raise PanelValidationError("A model needs at least one regressor")
        if len(set(self.regressors)) != len(self.regressors):
            raise PanelValidationError("Duplicate regressors in model spec")
        unknown = [g for g in self.grouped if g not in self.regressors]
        if unknown:
            raise PanelValidationError(f"Grouped slopes reference non-regressors: {unknown}")
        if self.grouped and self.group_var is None:
            raise PanelValidationError("Grouped slopes need a group_var mapping")

    def label(self, term: str) -> str:
        return self.labels.get(term, term)


@dataclass(frozen=True, eq=False)
class EstimationSample:
    """Panel restricted to the spec's sample plus the long rows used in estimation."""

    panel: PanelDataset
    rows: LongRows
    dependent: str
    regressors: Tuple[str, ...]
    labels: Mapping[str, str]
    horizons: Mapping[str, int]

    @property
    def y(self) -> np.ndarray:
        return self.rows.column(self.dependent)

    @property
    def x(self) -> np.ndarray:
        idx = [self.rows.names.index(r) for r in self.regressors]
        return self.rows.data[:, idx]


def prepare_sample(spec: ModelSpec, p: PanelDataset, min_entities: int = 2) -> EstimationSample:
    """
    Apply the sample predicate, expand grouped slopes and listwise-delete.

    Raises:
        PanelValidationError: unknown variables, too few entities, or groups
            missing for sampled entities
    """
    from .twfe import make_interaction

    panel = p
    if spec.sample is not None:
        keep = [e for e in p.entities if spec.sample(e)]
        if not keep:
            raise PanelValidationError(f"Sample of model '{spec.name}' is empty")
        panel = p.select_entities(keep)

    regressors: List[str] = []
    labels: Dict[str, str] = dict(spec.labels)
    horizons: Dict[str, int] = dict(spec.horizons)
    if spec.grouped:
        uncovered = [e for e in panel.entities if e not in spec.group_var]
        if uncovered:
            raise PanelValidationError(
                f"Group mapping does not cover {len(uncovered)} sampled entities (e.g. {uncovered[:5]})"
            )
    for reg in spec.regressors:
        if reg in spec.grouped:
            cols = make_interaction(panel, reg, spec.group_var, factor_name="type")
            panel = panel.with_columns(*cols)
            for col in cols:
                regressors.append(col.name)
                level = col.name.split('_x_')[0]
                labels[col.name] = f"{level.replace('type', 'Type ')} × {spec.label(reg)}"
                if reg in spec.horizons:
                    horizons[col.name] = spec.horizons[reg]
        else:
            regressors.append(reg)

    rows = panel.long_rows([spec.dependent] + regressors)
    n_ent = len(np.unique(rows.entity_idx))
    if n_ent < min_entities:
        raise PanelValidationError(
            f"Model '{spec.name}' has {n_ent} entities with complete data; need at least {min_entities}"
        )
    return EstimationSample(panel, rows, spec.dependent, tuple(regressors), labels, horizons)


@dataclass(frozen=True, eq=False)
class BalancedSample:
    """Complete entity×year block cut from an estimation sample."""

    entities: Tuple[str, ...]
    years: Tuple[int, ...]
    y: np.ndarray
    x: np.ndarray
    regressors: Tuple[str, ...]
    labels: Mapping[str, str]
    horizons: Mapping[str, int]
    dropped_entities: Tuple[str, ...] = ()

    @property
    def shape(self) -> Tuple[int, int]:
        return self.y.shape

    def index_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Entity-major (entity_idx, year_idx) for flattened N×T arrays."""
        n, t = self.y.shape
        return np.repeat(np.arange(n), t), np.tile(np.arange(t), n)


def balance_sample(sample: EstimationSample, min_entities: int = 2) -> BalancedSample:
    """
    Reduce an estimation sample to a balanced block.

    Years with no surviving row (lost to lags, leads or differencing) are
    dropped, then entities with a gap in the remaining years are excluded.

    Raises:
        PanelValidationError: fewer than `min_entities` complete entities
    """
    rows = sample.rows
    panel = sample.panel
    present = np.zeros((panel.n_entities, panel.n_years), dtype=bool)
    present[rows.entity_idx, rows.year_idx] = True
    year_keep = np.flatnonzero(present.any(axis=0))
    entity_keep = np.flatnonzero(present[:, year_keep].all(axis=1))
    kept = set(entity_keep.tolist())
    dropped = tuple(
        panel.entities[i] for i in np.flatnonzero(present.any(axis=1)) if i not in kept
    )
    if dropped:
        logger.warning(f"Excluded {len(dropped)} entities with incomplete years to balance the sample")
    if len(entity_keep) < min_entities:
        raise PanelValidationError(
            f"Balanced sample has {len(entity_keep)} entities; need at least {min_entities}"
        )

    n, t, k = len(entity_keep), len(year_keep), len(sample.regressors)
    pos = np.full((panel.n_entities, panel.n_years), -1)
    pos[rows.entity_idx, rows.year_idx] = np.arange(rows.nobs)
    take = pos[np.ix_(entity_keep, year_keep)]
    y = sample.y[take]
    x = sample.x[take.ravel()].reshape(n, t, k)
    return BalancedSample(
        entities=tuple(panel.entities[i] for i in entity_keep),
        years=tuple(panel.years[j] for j in year_keep),
        y=y,
        x=x,
        regressors=sample.regressors,
        labels=sample.labels,
        horizons=sample.horizons,
        dropped_entities=dropped,
    )


@dataclass(eq=False, kw_only=True)
class BaseFit:
    """Fields and accessors shared by every estimator's result."""

    model_name: str
    estimator: Estimator
    dependent: str
    names: Tuple[str, ...]
    params: np.ndarray
    vcov: np.ndarray
    resid: np.ndarray
    nobs: int
    loglik: float
    aic: float
    bic: float
    entities: Tuple[str, ...]
    years: Tuple[int, ...]
    entity_idx: np.ndarray
    year_idx: np.ndarray
    labels: Mapping[str, str] = field(default_factory=dict)
    horizons: Mapping[str, int] = field(default_factory=dict)
    pvalue_dist: str = "normal"
    pvalue_dof: Optional[int] = None

    @property
    def k(self) -> int:
        return len(self.names)

    @property
    def n_entities(self) -> int:
        return len(np.unique(self.entity_idx))

    @property
    def n_years(self) -> int:
        return len(np.unique(self.year_idx))

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov)[: self.k], 0.0, None))

    @property
    def pvalues(self) -> np.ndarray:
        return pvalues(self.params, self.se, self.pvalue_dist, self.pvalue_dof)

    def coef(self, name: str) -> float:
        return float(self.params[self.names.index(name)])

    def std_error(self, name: str) -> float:
        return float(self.se[self.names.index(name)])

    def residual_matrix(self) -> np.ndarray:
        """Residuals mapped back to an entity×year matrix, NaN where not estimated."""
        out = np.full((len(self.entities), len(self.years)), np.nan)
        out[self.entity_idx, self.year_idx] = self.resid
        return out

    def coef_table(self, level: float = 0.95) -> pd.DataFrame:
        """Coefficient table with SEs, p-values, codes and confidence bounds."""
        crit = critical_value(level)
        se = self.se
        p = self.pvalues
        return pd.DataFrame({
            'term': list(self.names),
            'label': [self.labels.get(n, n) for n in self.names],
            'estimate': self.params[: self.k],
            'std_error': se,
            'p_value': p,
            'signif': [signif_code(v) for v in p],
            'ci_lo': self.params[: self.k] - crit * se,
            'ci_hi': self.params[: self.k] + crit * se,
        })

    def fit_statistics(self) -> Dict[str, Any]:
        return {
            'nobs': self.nobs,
            'loglik': self.loglik,
            'aic': self.aic,
            'bic': self.bic,
        }


@dataclass(eq=False, kw_only=True)
class FitResult(BaseFit):
    """TWFE least-squares fit with default and clustered covariance."""

    vcov_iid: np.ndarray
    vcov_clustered: Optional[np.ndarray]
    cluster_dims: FrozenSet[Dim]
    r2: float
    within_r2: float
    df_resid: int
    n_fe: int
    design: np.ndarray = field(repr=False)
    bread: np.ndarray = field(repr=False)

    @property
    def scores(self) -> np.ndarray:
        """Per-row score contributions Ẍ_r·e_r."""
        return self.design * self.resid[:, None]

    def fit_statistics(self) -> Dict[str, Any]:
        stats = super().fit_statistics()
        stats.update({'r2': self.r2, 'within_r2': self.within_r2})
        return stats


def gaussian_loglik(ssr: float, nobs: int) -> float:
    """Profile Gaussian log-likelihood at σ² = SSR/n."""
    return -0.5 * nobs * (np.log(2.0 * np.pi * ssr / nobs) + 1.0)


def information_criteria(loglik: float, n_params: int, nobs: int) -> Tuple[float, float]:
    """(AIC, BIC)."""
    return -2.0 * loglik + 2.0 * n_params, -2.0 * loglik + np.log(nobs) * n_params
