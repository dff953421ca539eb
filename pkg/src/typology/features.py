"""
County Indicator Feature Tables
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import PanelValidationError
from ..weights.adjacency import FIPS_WIDTH

logger = logging.getLogger(__name__)

CLUSTER_FEATURES = (
    'rural_urban',
    'population',
    'edu_attain',
    'median_earnings',
    'female_lfp',
    'diversity_index',
)


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """
    Standardized entity×indicator matrix.

    `raw` keeps the unstandardized indicators (indexed by entity id);
    `passive` holds descriptor columns carried alongside but not clustered.
    """

    ids: Tuple[str, ...]
    names: Tuple[str, ...]
    z: np.ndarray
    means: np.ndarray
    sds: np.ndarray
    raw: pd.DataFrame = field(repr=False)
    passive: pd.DataFrame = field(repr=False)
    excluded: Tuple[str, ...] = ()

    @property
    def n_rows(self) -> int:
        return self.z.shape[0]

    def inverse(self, z: Optional[np.ndarray] = None) -> np.ndarray:
        """Map standardized values back to indicator units."""
        z = self.z if z is None else z
        return z * self.sds + self.means

    def subset(self, keep: Sequence[str]) -> 'FeatureTable':
        """Re-standardize over a subset of entities (e.g. coal counties)."""
        keep_set = set(keep)
        rows = [i for i in self.ids if i in keep_set]
        frame = self.raw.loc[rows].reset_index()
        passive = self.passive.loc[rows].reset_index() if not self.passive.empty else None
        if passive is not None:
            frame = frame.merge(passive, on='fips', how='left')
        return standardize(frame, columns=self.names, passive=tuple(self.passive.columns))


def standardize(
    raw: pd.DataFrame,
    columns: Optional[Sequence[str]] = None,
    passive: Optional[Sequence[str]] = None,
    id_col: str = 'fips',
) -> FeatureTable:
    """
    z-score the indicator columns with the n−1 standard deviation.

    Rows with a missing indicator are excluded and reported.

    Args:
        raw: Frame with an id column and indicator columns
        columns: Indicators to standardize; defaults to the known cluster
            features present, else every numeric non-passive column
        passive: Descriptor columns carried along unclustered

    Raises:
        PanelValidationError: fewer than two rows, no columns, or a
            zero-variance column
    """
    if id_col not in raw.columns:
        raise PanelValidationError(f"Feature table needs an '{id_col}' column")
    passive = tuple(passive or ())
    if columns is None:
        columns = [c for c in CLUSTER_FEATURES if c in raw.columns]
        if not columns:
            columns = [
                c for c in raw.columns
                if c != id_col and c not in passive and pd.api.types.is_numeric_dtype(raw[c])
            ]
    columns = tuple(columns)
    if not columns:
        raise PanelValidationError("Feature table has no indicator columns")
    missing_cols = [c for c in columns + passive if c not in raw.columns]
    if missing_cols:
        raise PanelValidationError(f"Feature table is missing columns: {missing_cols}")

    frame = raw.copy()
    frame[id_col] = frame[id_col].astype(str)
    if frame[id_col].duplicated().any():
        dup = frame.loc[frame[id_col].duplicated(), id_col].iloc[0]
        raise PanelValidationError(f"Duplicate entity '{dup}' in feature table")
    incomplete = frame[list(columns)].isna().any(axis=1)
    excluded = tuple(frame.loc[incomplete, id_col])
    if excluded:
        logger.warning(f"Excluded {len(excluded)} entities with missing indicators (e.g. {list(excluded[:5])})")
    frame = frame.loc[~incomplete]
    if len(frame) < 2:
        raise PanelValidationError("Feature table needs at least two complete rows")

    x = frame[list(columns)].to_numpy(dtype=float)
    means = x.mean(axis=0)
    sds = x.std(axis=0, ddof=1)
    flat = [c for c, s in zip(columns, sds) if not s > 0]
    if flat:
        raise PanelValidationError(f"Zero-variance feature column(s): {flat}")
    z = (x - means) / sds

    indexed = frame.set_index(id_col)
    table = FeatureTable(
        ids=tuple(frame[id_col]),
        names=columns,
        z=z,
        means=means,
        sds=sds,
        raw=indexed[list(columns)],
        passive=indexed[list(passive)],
        excluded=excluded,
    )
    logger.info(f"Standardized {table.n_rows} rows × {len(columns)} indicators")
    return table


def read_features(path: Union[str, Path]) -> pd.DataFrame:
    """Read a features CSV with zero-padded FIPS ids."""
    try:
        frame = pd.read_csv(path, dtype={'fips': str})
    except (OSError, pd.errors.ParserError) as exc:
        raise PanelValidationError(f"Cannot read features file {path}: {exc}") from exc
    if 'fips' not in frame.columns:
        raise PanelValidationError(f"Features file {path} has no 'fips' column")
    frame['fips'] = frame['fips'].str.strip().str.zfill(FIPS_WIDTH)
    return frame


def split_columns(
    frame: pd.DataFrame,
    columns: Optional[Sequence[str]] = None,
    passive: Optional[Sequence[str]] = None,
) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
    """
    Resolve (clustered, passive) columns of a features frame.

    Without explicit columns the known cluster features are clustered and
    the other numeric columns are passive; a frame with none of the known
    features clusters every numeric column not named passive.
    """
    numeric = [c for c in frame.columns if c != 'fips' and pd.api.types.is_numeric_dtype(frame[c])]
    if columns is None:
        known = [c for c in CLUSTER_FEATURES if c in frame.columns]
        if known:
            columns = known
        else:
            columns = [c for c in numeric if c not in set(passive or ())]
    if passive is None:
        passive = [c for c in numeric if c not in set(columns)]
    return tuple(columns), tuple(passive)
