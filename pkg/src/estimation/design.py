"""
Declarative Model Specification Files

A spec file is a YAML document validated by `ModelSpecConfig`; `build_design`
derives every transformed column it names on a panel and resolves it into
a `ModelSpec` that the estimators consume.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

import pandas as pd
import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from ..errors import PanelValidationError
from ..panel.dataset import PanelDataset, coal_predicate
from ..panel.transforms import (
    broadcast_entity, first_difference, indicator_threshold, interaction, lag, lead, log_col, sign_part,
)
from .spec import Dim, Estimator, ModelSpec

logger = logging.getLogger(__name__)


class VariableConfig(BaseModel):
    """One panel variable with its transforms (log first, then difference)."""

    var: str
    log: bool = False
    difference: bool = True
    label: Optional[str] = None


class TreatmentConfig(VariableConfig):
    lags: List[int] = Field(default_factory=lambda: [0])
    leads: List[int] = Field(default_factory=list)

    @field_validator('lags', 'leads')
    @classmethod
    def _non_negative(cls, v: List[int]) -> List[int]:
        if any(h < 0 for h in v) or len(set(v)) != len(v):
            raise ValueError("horizons must be distinct non-negative integers")
        return sorted(v)

    @model_validator(mode='after')
    def _some_horizon(self) -> 'TreatmentConfig':
        if not self.lags and not self.leads:
            raise ValueError("treatment needs at least one lag or lead")
        if 0 in self.leads:
            raise ValueError("lead 0 duplicates lag 0")
        return self


class InteractionConfig(BaseModel):
    """
    A factor interacted with every (or selected) treatment horizons.

    kinds:
      sign_negative / sign_positive: indicator that the treatment change at
        that horizon is negative / positive
      threshold: numerator/denominator >= threshold, measured at the same horizon
      entity: entity-level attribute >= cutoff (from the features table)
    """

    kind: Literal['sign_negative', 'sign_positive', 'threshold', 'entity']
    name: Optional[str] = None
    label: Optional[str] = None
    numerator: Optional[str] = None
    denominator: Optional[str] = None
    threshold: Optional[float] = None
    attribute: Optional[str] = None
    cutoff: Optional[float] = None
    include_level: bool = False
    horizons: Optional[List[int]] = None

    @model_validator(mode='after')
    def _kind_fields(self) -> 'InteractionConfig':
        if self.kind == 'threshold' and None in (self.numerator, self.denominator, self.threshold):
            raise ValueError("threshold interaction needs numerator, denominator and threshold")
        if self.kind == 'entity' and None in (self.attribute, self.cutoff):
            raise ValueError("entity interaction needs attribute and cutoff")
        return self


class GroupsConfig(BaseModel):
    """Grouped slopes from an entity→group labels CSV (e.g. typology output)."""

    path: str
    column: str = 'type'


class ModelSpecConfig(BaseModel):
    """Schema of a model spec file."""

    name: str
    title: Optional[str] = None
    estimator: Estimator = Estimator.TWFE
    dependent: VariableConfig
    treatment: TreatmentConfig
    controls: List[VariableConfig] = Field(default_factory=list)
    interactions: List[InteractionConfig] = Field(default_factory=list)
    include_treatment: bool = True
    sample: Literal['all', 'coal'] = 'all'
    coal_var: str = 'active_mines'
    fe: List[Dim] = Field(default_factory=lambda: [Dim.ENTITY, Dim.YEAR])
    cluster: List[Dim] = Field(default_factory=lambda: [Dim.ENTITY, Dim.YEAR])
    groups: Optional[GroupsConfig] = None
    factors: int = Field(1, ge=0, le=8)
    smoothing: Optional[float] = Field(None, ge=0)

    @model_validator(mode='after')
    def _treatment_terms(self) -> 'ModelSpecConfig':
        if not self.include_treatment and not self.interactions:
            raise ValueError("a model without treatment main effects needs interactions")
        if not self.fe:
            raise ValueError("fe must name at least one dimension")
        return self


def load_spec_file(path: Union[str, Path]) -> List[ModelSpecConfig]:
    """
    Read a spec file holding one model or a `models:` list.

    Raises:
        PanelValidationError: unreadable YAML or schema violations
    """
    try:
        with open(path, 'r') as f:
            doc = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as exc:
        raise PanelValidationError(f"Cannot read spec file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise PanelValidationError(f"Spec file {path} must hold a mapping")
    entries = doc['models'] if 'models' in doc else [doc]
    try:
        return [ModelSpecConfig(**entry) for entry in entries]
    except ValidationError as exc:
        raise PanelValidationError(f"Invalid spec file {path}: {exc}") from exc
    except TypeError as exc:
        raise PanelValidationError(f"Invalid spec file {path}: {exc}") from exc


@dataclass(frozen=True, eq=False)
class Design:
    """A spec config resolved against a panel."""

    config: ModelSpecConfig
    panel: PanelDataset
    spec: ModelSpec
    treatment_terms: Tuple[str, ...]
    combinations: Mapping[str, Mapping[str, float]] = field(default_factory=dict)

    @property
    def estimator(self) -> Estimator:
        return self.config.estimator


def _horizon_suffix(h: int) -> str:
    if h == 0:
        return "t"
    return f"t-{h}" if h > 0 else f"t+{-h}"


def _base_variable(panel: PanelDataset, cfg: VariableConfig) -> Tuple[PanelDataset, str, str]:
    name = cfg.var
    label = cfg.label or cfg.var
    if cfg.log:
        col = log_col(panel, name)
        panel, name = panel.with_columns(col), col.name
        label = f"log {label}" if not cfg.label else label
    if cfg.difference:
        col = first_difference(panel, name)
        panel, name = panel.with_columns(col), col.name
        label = f"Δ {label}"
    return panel, name, label


def _shift(panel: PanelDataset, name: str, h: int) -> Tuple[PanelDataset, str]:
    if h == 0:
        return panel, name
    col = lag(panel, name, h) if h > 0 else lead(panel, name, -h)
    return panel.with_columns(col), col.name


def build_design(
    cfg: ModelSpecConfig,
    panel: PanelDataset,
    features: Optional[pd.DataFrame] = None,
    groups: Optional[Mapping[str, Any]] = None,
) -> Design:
    """
    Derive the columns a spec config names and resolve it into a ModelSpec.

    Args:
        cfg: Validated spec config
        panel: Raw panel
        features: Entity-level features (fips column) for entity interactions
        groups: Entity→group mapping when cfg.groups is set

    Raises:
        PanelValidationError: unknown variables, missing features or groups
    """
    p, dep, dep_label = _base_variable(panel, cfg.dependent)
    p, treat_base, treat_label = _base_variable(p, cfg.treatment)

    horizons = list(cfg.treatment.lags) + [-h for h in cfg.treatment.leads]
    horizons.sort(key=lambda h: (h < 0, abs(h)))
    treat_terms: Dict[int, str] = {}
    labels: Dict[str, str] = {}
    horizon_of: Dict[str, int] = {}
    for h in horizons:
        p, term = _shift(p, treat_base, h)
        treat_terms[h] = term
        labels[term] = f"{treat_label}_{_horizon_suffix(h)}"
        horizon_of[term] = h

    regressors: List[str] = list(treat_terms.values()) if cfg.include_treatment else []
    combinations: Dict[str, Dict[str, float]] = {}

    for inter in cfg.interactions:
        targets = [h for h in horizons if inter.horizons is None or h in inter.horizons]
        for h in targets:
            term = treat_terms[h]
            suffix = _horizon_suffix(h)
            if inter.kind in ('sign_negative', 'sign_positive'):
                negative = inter.kind == 'sign_negative'
                factor_col = sign_part(p, term, negative=negative)
                p = p.with_columns(factor_col)
                factor = factor_col.name
                tag = inter.label or f"Δ{'negative' if negative else 'positive'}"
            elif inter.kind == 'threshold':
                ind = indicator_threshold(p, inter.numerator, inter.denominator, inter.threshold)
                p = p.with_columns(ind)
                p, factor = _shift(p, ind.name, h)
                tag = inter.label or inter.name or "indicator"
                if inter.include_level and factor not in regressors:
                    regressors.append(factor)
                    labels[factor] = f"{tag}_{suffix}"
            else:
                factor = inter.name or f"{inter.attribute}_ge_{inter.cutoff:g}"
                if factor not in p.columns:
                    p = p.with_columns(_entity_indicator(p, factor, features, inter.attribute, inter.cutoff))
                tag = inter.label or factor
            product = interaction(p, term, factor)
            p = p.with_columns(product)
            regressors.append(product.name)
            labels[product.name] = f"{labels[term]} × {tag}_{suffix}" if inter.kind != 'entity' else f"{labels[term]} × {tag}"
            horizon_of[product.name] = h
            if cfg.include_treatment:
                combinations[f"{labels[term]} + {tag} interaction"] = {term: 1.0, product.name: 1.0}

    controls = []
    for ctrl in cfg.controls:
        p, name, label = _base_variable(p, ctrl)
        controls.append(name)
        labels[name] = label
    regressors.extend(c for c in controls if c not in regressors)

    if cfg.include_treatment and len(treat_terms) > 1:
        lagged = [treat_terms[h] for h in horizons if h >= 0]
        if len(lagged) > 1:
            combinations["Sum of lagged effects"] = {term: 1.0 for term in lagged}

    sample = coal_predicate(p, cfg.coal_var) if cfg.sample == 'coal' else None
    group_var = None
    grouped: Tuple[str, ...] = ()
    if cfg.groups is not None:
        if groups is None:
            raise PanelValidationError(f"Model '{cfg.name}' needs group labels from {cfg.groups.path}")
        group_var = dict(groups)
        grouped = tuple(t for t in treat_terms.values() if t in regressors)

    spec = ModelSpec(
        dependent=dep,
        regressors=tuple(regressors),
        fe_dims=frozenset(cfg.fe),
        cluster_dims=frozenset(cfg.cluster),
        sample=sample,
        group_var=group_var,
        grouped=grouped,
        name=cfg.name,
        labels=labels,
        horizons=horizon_of,
    )
    logger.info(f"Resolved model '{cfg.name}' ({cfg.estimator.value}): {dep_label} on {len(regressors)} regressors")
    return Design(cfg, p, spec, tuple(treat_terms.values()), combinations)


def _entity_indicator(
    p: PanelDataset,
    name: str,
    features: Optional[pd.DataFrame],
    attribute: str,
    cutoff: float,
):
    if features is None or attribute not in features.columns:
        raise PanelValidationError(f"Entity interaction needs feature column '{attribute}'")
    values = {
        str(fips): (None if pd.isna(v) else float(v >= cutoff))
        for fips, v in zip(features['fips'], features[attribute])
    }
    return broadcast_entity(p, name, values)


def read_group_labels(path: Union[str, Path], column: str = 'type') -> Dict[str, Any]:
    """Read a `fips,<column>` labels CSV into an entity→group mapping."""
    frame = pd.read_csv(path, dtype={'fips': str})
    if 'fips' not in frame.columns or column not in frame.columns:
        raise PanelValidationError(f"Labels file {path} must have 'fips' and '{column}' columns")
    frame['fips'] = frame['fips'].str.zfill(5)
    return dict(zip(frame['fips'], frame[column]))
