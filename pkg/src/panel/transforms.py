"""
Panel Variable Transforms
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from ..errors import PanelValidationError
from .dataset import Column, PanelDataset

logger = logging.getLogger(__name__)


class TransformKind(Enum):
    """Supported variable transforms."""
    FIRST_DIFFERENCE = "diff"
    LAG = "lag"
    LEAD = "lead"
    LOG = "log"
    INDICATOR_THRESHOLD = "indicator"
    INTERACTION = "interaction"


@dataclass(frozen=True)
class VariableTransform:
    """Declarative description of one derived column."""

    kind: TransformKind
    sources: Tuple[str, ...]
    parameter: Optional[float] = None

    def __post_init__(self):
        if self.kind in (TransformKind.LAG, TransformKind.LEAD):
            if self.parameter is None or int(self.parameter) != self.parameter or self.parameter < 1:
                raise PanelValidationError(f"{self.kind.value} order must be an integer >= 1")
        if self.kind == TransformKind.INDICATOR_THRESHOLD:
            if self.parameter is None or not math.isfinite(self.parameter):
                raise PanelValidationError("Indicator threshold must be finite")
        expected = 2 if self.kind in (TransformKind.INDICATOR_THRESHOLD, TransformKind.INTERACTION) else 1
        if len(self.sources) != expected:
            raise PanelValidationError(
                f"{self.kind.value} transform takes {expected} source variable(s), got {len(self.sources)}"
            )

    def apply(self, p: PanelDataset) -> Column:
        """Compute the derived column on a panel."""
        if self.kind == TransformKind.FIRST_DIFFERENCE:
            return first_difference(p, self.sources[0])
        if self.kind == TransformKind.LAG:
            return lag(p, self.sources[0], int(self.parameter))
        if self.kind == TransformKind.LEAD:
            return lead(p, self.sources[0], int(self.parameter))
        if self.kind == TransformKind.LOG:
            return log_col(p, self.sources[0])
        if self.kind == TransformKind.INDICATOR_THRESHOLD:
            return indicator_threshold(p, self.sources[0], self.sources[1], float(self.parameter))
        return interaction(p, self.sources[0], self.sources[1])


def apply_transform(p: PanelDataset, transform: VariableTransform) -> Tuple[PanelDataset, str]:
    """Apply a transform and return the extended panel with the new column name."""
    col = transform.apply(p)
    return p.with_columns(col), col.name


def first_difference(p: PanelDataset, var: str) -> Column:
    """Δx_it = x_it − x_i,t−1; the first year is masked."""
    src = p.get(var)
    if p.n_years < 2:
        raise PanelValidationError("First difference needs at least two years")
    values = np.zeros_like(src.values)
    mask = np.ones_like(src.mask)
    values[:, 1:] = src.values[:, 1:] - src.values[:, :-1]
    mask[:, 1:] = src.mask[:, 1:] | src.mask[:, :-1]
    return Column(f"d_{var}", values, mask, lost_leading=1)


def _check_order(p: PanelDataset, k: int) -> None:
    if not 1 <= k <= p.n_years - 1:
        raise PanelValidationError(f"Shift order {k} outside [1, {p.n_years - 1}]")


def lag(p: PanelDataset, var: str, k: int) -> Column:
    """x_i,t−k; the first k years are masked."""
    _check_order(p, k)
    src = p.get(var)
    values = np.zeros_like(src.values)
    mask = np.ones_like(src.mask)
    values[:, k:] = src.values[:, :-k]
    mask[:, k:] = src.mask[:, :-k]
    return Column(f"L{k}_{var}", values, mask, lost_leading=k)


def lead(p: PanelDataset, var: str, k: int) -> Column:
    """x_i,t+k; the last k years are masked."""
    _check_order(p, k)
    src = p.get(var)
    values = np.zeros_like(src.values)
    mask = np.ones_like(src.mask)
    values[:, :-k] = src.values[:, k:]
    mask[:, :-k] = src.mask[:, k:]
    return Column(f"F{k}_{var}", values, mask, lost_trailing=k)


def log_col(p: PanelDataset, var: str) -> Column:
    """Natural log; every unmasked cell must be strictly positive."""
    src = p.get(var)
    bad = (src.values <= 0) & ~src.mask
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise PanelValidationError(
            f"Cannot take log of non-positive '{var}' = {src.values[i, j]} "
            f"at entity {p.entities[i]}, year {p.years[j]}"
        )
    values = np.where(src.mask, 0.0, np.log(np.where(src.mask, 1.0, src.values)))
    return Column(f"log_{var}", values, src.mask.copy())


def indicator_threshold(p: PanelDataset, var_num: str, var_den: str, theta: float) -> Column:
    """1 where var_num / var_den >= theta, else 0."""
    num = p.get(var_num)
    den = p.get(var_den)
    mask = num.mask | den.mask
    bad = (den.values <= 0) & ~mask
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise PanelValidationError(
            f"Indicator denominator '{var_den}' must be positive; "
            f"got {den.values[i, j]} at entity {p.entities[i]}, year {p.years[j]}"
        )
    ratio = num.values / np.where(mask, 1.0, den.values)
    values = np.where(mask, 0.0, (ratio >= theta).astype(float))
    return Column(f"ind_{var_num}_{var_den}_{theta:g}", values, mask)


def interaction(p: PanelDataset, var_a: str, var_b: str) -> Column:
    """Cell-wise product of two columns."""
    a = p.get(var_a)
    b = p.get(var_b)
    mask = a.mask | b.mask
    values = np.where(mask, 0.0, a.values * b.values)
    return Column(f"{var_a}_x_{var_b}", values, mask)


def sign_part(p: PanelDataset, var: str, negative: bool = True) -> Column:
    """Indicator of a strictly negative (or strictly positive) value."""
    src = p.get(var)
    flag = src.values < 0 if negative else src.values > 0
    suffix = "neg" if negative else "pos"
    return Column(f"{var}_{suffix}", np.where(src.mask, 0.0, flag.astype(float)), src.mask.copy())


def broadcast_entity(p: PanelDataset, name: str, values_by_entity: dict) -> Column:
    """Repeat an entity-level attribute across all years; unknown entities are masked."""
    n, t = p.n_entities, p.n_years
    values = np.zeros((n, t))
    mask = np.ones((n, t), dtype=bool)
    for i, entity in enumerate(p.entities):
        if entity in values_by_entity and values_by_entity[entity] is not None:
            values[i, :] = float(values_by_entity[entity])
            mask[i, :] = False
    return Column(name, values, mask)
