"""
Balanced Panel Data Model
"""

import logging
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import PanelValidationError

logger = logging.getLogger(__name__)

Record = Tuple[str, int, str, float]


@dataclass(frozen=True, eq=False)
class Column:
    """A derived N×T column with its missing mask (True = missing)."""

    name: str
    values: np.ndarray
    mask: np.ndarray
    lost_leading: int = 0
    lost_trailing: int = 0


@dataclass(frozen=True, eq=False)
class LongRows:
    """Entity-year rows surviving listwise deletion, in entity-major order."""

    entity_idx: np.ndarray
    year_idx: np.ndarray
    data: np.ndarray
    names: Tuple[str, ...]

    @property
    def nobs(self) -> int:
        return int(self.data.shape[0])

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.names.index(name)]


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """
    Balanced entity×year panel of named numeric variables.

    Values are stored as N×T float arrays; missing cells are tracked in a
    separate boolean mask per column and their stored value is 0.0.
    """

    entities: Tuple[str, ...]
    years: Tuple[int, ...]
    columns: Mapping[str, np.ndarray]
    masks: Mapping[str, np.ndarray]
    entity_index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.entities)) != len(self.entities):
            raise PanelValidationError("Duplicate entity identifiers in panel")
        years = list(self.years)
        if not years or years != list(range(years[0], years[0] + len(years))):
            raise PanelValidationError(f"Years must be strictly increasing and contiguous: {years}")
        shape = (len(self.entities), len(self.years))
        frozen_cols: Dict[str, np.ndarray] = {}
        frozen_masks: Dict[str, np.ndarray] = {}
        for name, values in self.columns.items():
            values = np.array(values, dtype=float)
            mask = np.array(self.masks.get(name, np.zeros(shape, dtype=bool)), dtype=bool)
            if values.shape != shape or mask.shape != shape:
                raise PanelValidationError(
                    f"Column '{name}' has shape {values.shape}, expected {shape}"
                )
            values[mask] = 0.0
            values.setflags(write=False)
            mask.setflags(write=False)
            frozen_cols[name] = values
            frozen_masks[name] = mask
        object.__setattr__(self, 'columns', MappingProxyType(frozen_cols))
        object.__setattr__(self, 'masks', MappingProxyType(frozen_masks))
        object.__setattr__(
            self, 'entity_index', MappingProxyType({e: i for i, e in enumerate(self.entities)})
        )

    @property
    def n_entities(self) -> int:
        return len(self.entities)

    @property
    def n_years(self) -> int:
        return len(self.years)

    @property
    def variables(self) -> List[str]:
        return list(self.columns)

    def get(self, name: str) -> Column:
        """Get a column by name."""
        if name not in self.columns:
            raise PanelValidationError(f"Unknown variable: '{name}'")
        return Column(name, self.columns[name], self.masks[name])

    def masked(self, name: str) -> np.ma.MaskedArray:
        """Column as a numpy masked array."""
        col = self.get(name)
        return np.ma.MaskedArray(col.values, mask=col.mask)

    def with_columns(self, *new_columns: Column) -> 'PanelDataset':
        """Return a new panel with the given columns added (or replaced)."""
        columns = dict(self.columns)
        masks = dict(self.masks)
        for col in new_columns:
            columns[col.name] = col.values
            masks[col.name] = col.mask
        return PanelDataset(self.entities, self.years, columns, masks)

    def select_entities(self, keep: Sequence[str]) -> 'PanelDataset':
        """Restrict to the given entities (kept in panel order)."""
        keep_set = set(keep)
        rows = [i for i, e in enumerate(self.entities) if e in keep_set]
        return PanelDataset(
            tuple(self.entities[i] for i in rows),
            self.years,
            {name: vals[rows] for name, vals in self.columns.items()},
            {name: m[rows] for name, m in self.masks.items()},
        )

    def long_rows(self, names: Sequence[str]) -> LongRows:
        """
        Stack the named columns into long rows, dropping any entity-year with a
        masked value in any of them (listwise deletion).
        """
        names = tuple(names)
        for name in names:
            if name not in self.columns:
                raise PanelValidationError(f"Unknown variable: '{name}'")
        n, t = self.n_entities, self.n_years
        mask = np.zeros((n, t), dtype=bool)
        for name in names:
            mask |= self.masks[name]
        keep = ~mask.ravel()
        entity_idx = np.repeat(np.arange(n), t)[keep]
        year_idx = np.tile(np.arange(t), n)[keep]
        if names:
            data = np.column_stack([self.columns[name].ravel()[keep] for name in names])
        else:
            data = np.empty((int(keep.sum()), 0))
        return LongRows(entity_idx, year_idx, data, names)

    def to_records(self) -> List[Record]:
        """Export unmasked cells as (entity, year, name, value) records."""
        records: List[Record] = []
        for name, values in self.columns.items():
            mask = self.masks[name]
            for i, entity in enumerate(self.entities):
                for j, year in enumerate(self.years):
                    if not mask[i, j]:
                        records.append((entity, year, name, float(values[i, j])))
        return records

    def to_frame(self) -> pd.DataFrame:
        """Wide entity-year frame (fips, year, var...) with NaN at masked cells."""
        index = pd.MultiIndex.from_product([self.entities, self.years], names=['fips', 'year'])
        data = {
            name: np.where(self.masks[name], np.nan, values).ravel()
            for name, values in self.columns.items()
        }
        return pd.DataFrame(data, index=index).reset_index()


def build_panel(records: Iterable[Record]) -> PanelDataset:
    """
    Build a balanced panel from long (entity, year, name, value) records.

    Entities are ordered lexicographically and years ascending. Cells never
    supplied, or supplied with a NaN/None value, are masked.

    Raises:
        PanelValidationError: duplicate triple, no records, or a year gap
    """
    seen: Dict[Tuple[str, int, str], float] = {}
    for entity, year, name, value in records:
        key = (str(entity), int(year), str(name))
        if key in seen:
            raise PanelValidationError(f"Duplicate record for (entity, year, variable) = {key}")
        seen[key] = value
    if not seen:
        raise PanelValidationError("No records supplied")

    entities = sorted({k[0] for k in seen})
    years = sorted({k[1] for k in seen})
    if years != list(range(years[0], years[-1] + 1)):
        missing = sorted(set(range(years[0], years[-1] + 1)) - set(years))
        raise PanelValidationError(f"Year range is not contiguous; missing years {missing}")
    names = sorted({k[2] for k in seen})

    e_pos = {e: i for i, e in enumerate(entities)}
    y_pos = {y: j for j, y in enumerate(years)}
    shape = (len(entities), len(years))
    columns = {name: np.zeros(shape) for name in names}
    masks = {name: np.ones(shape, dtype=bool) for name in names}
    for (entity, year, name), value in seen.items():
        if value is None or pd.isna(value):
            continue
        i, j = e_pos[entity], y_pos[year]
        columns[name][i, j] = float(value)
        masks[name][i, j] = False

    panel = PanelDataset(tuple(entities), tuple(years), columns, masks)
    n_masked = sum(int(m.sum()) for m in masks.values())
    logger.info(
        f"Built panel: N={panel.n_entities}, T={panel.n_years}, "
        f"{len(names)} variables, {n_masked} masked cells"
    )
    return panel


def panel_from_frame(frame: pd.DataFrame, entity_col: str = 'fips', year_col: str = 'year') -> PanelDataset:
    """Build a panel from a wide frame with one row per entity-year."""
    if entity_col not in frame.columns or year_col not in frame.columns:
        raise PanelValidationError(f"Panel table must have '{entity_col}' and '{year_col}' columns")
    value_cols = [c for c in frame.columns if c not in (entity_col, year_col)]
    long = frame.melt(id_vars=[entity_col, year_col], value_vars=value_cols, var_name='name')
    records = zip(
        long[entity_col].astype(str),
        long[year_col].astype(int),
        long['name'],
        long['value'].astype(float),
    )
    return build_panel(records)


def subset(p: PanelDataset, predicate: Callable[[str], bool]) -> PanelDataset:
    """
    Keep the entities for which the predicate holds, over the full year range.

    Raises:
        PanelValidationError: no entity satisfies the predicate
    """
    keep = [e for e in p.entities if predicate(e)]
    if not keep:
        raise PanelValidationError("Subset predicate selected no entities")
    logger.info(f"Subset kept {len(keep)} of {p.n_entities} entities")
    return p.select_entities(keep)


def coal_predicate(p: PanelDataset, var: str = 'active_mines') -> Callable[[str], bool]:
    """Entity predicate: the variable is positive in at least one unmasked year."""
    col = p.get(var)
    active = np.any((col.values > 0) & ~col.mask, axis=1)
    coal = {e for e, flag in zip(p.entities, active) if flag}
    return lambda entity: entity in coal


def entity_predicate(keep: Optional[Iterable[str]]) -> Callable[[str], bool]:
    """Predicate from an explicit entity list; None keeps everything."""
    if keep is None:
        return lambda entity: True
    keep_set = set(keep)
    return lambda entity: entity in keep_set
