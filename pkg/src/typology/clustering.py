"""
Ward Clustering, Cluster-count Criteria and Type Profiles
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd
from scipy.cluster.hierarchy import cut_tree, linkage
from sklearn.metrics import silhouette_score

from ..errors import PanelValidationError
from ..synth.rng import substreams
from .features import FeatureTable

logger = logging.getLogger(__name__)

GAP_REFERENCES = 100
MIN_GAP_REFERENCES = 50
COUNT_ROW = "Total number of counties per type"
REFERENCE_COLUMN = "Reference average"

# sign of each indicator in the "least vulnerable first" composite
COMPOSITE_SIGNS = {
    'edu_attain': 1.0,
    'median_earnings': 1.0,
    'female_lfp': 1.0,
    'diversity_index': 1.0,
    'rural_urban': -1.0,
    'population': 1.0,
}


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Ward merge history over the rows of a feature table."""

    linkage: np.ndarray
    ids: tuple

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def heights(self) -> np.ndarray:
        return self.linkage[:, 2]

    def cut(self, k: int) -> np.ndarray:
        """Cluster codes 0..k-1 for the k-cluster cut."""
        if not 1 <= k <= self.n:
            raise PanelValidationError(f"k must be between 1 and {self.n}, got {k}")
        return cut_tree(self.linkage, n_clusters=k).ravel()


@dataclass(frozen=True, eq=False)
class KSelection:
    """Elbow, silhouette and gap curves for k = 1..k_max."""

    ks: np.ndarray
    assignments: np.ndarray
    wss: np.ndarray
    silhouette: np.ndarray
    gap: np.ndarray
    gap_se: np.ndarray
    choice: Dict[str, int]
    n_refs: int
    seed: int

    @property
    def unanimous(self) -> bool:
        return len(set(self.choice.values())) == 1

    @property
    def note(self) -> str:
        if self.unanimous:
            return f"All criteria choose k = {self.choice['elbow']}"
        lo, hi = min(self.choice.values()), max(self.choice.values())
        picks = ", ".join(f"{name} k = {k}" for name, k in self.choice.items())
        return f"Criteria inconclusive between {lo} and {hi} clusters ({picks})"

    def curves(self) -> pd.DataFrame:
        return pd.DataFrame({
            'k': self.ks,
            'wss': self.wss,
            'silhouette': self.silhouette,
            'gap': self.gap,
            'gap_se': self.gap_se,
        })


@dataclass(frozen=True, eq=False)
class Typology:
    """Final typology: ordered labels 1..k plus the per-type profile."""

    k: int
    ids: tuple
    labels: np.ndarray
    profile: pd.DataFrame = field(repr=False)

    @property
    def sizes(self) -> Dict[int, int]:
        return {t: int((self.labels == t).sum()) for t in range(1, self.k + 1)}

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'fips': list(self.ids), 'type': self.labels})


@dataclass(frozen=True, eq=False)
class ClusteringResult:
    dendrogram: Dendrogram
    selection: KSelection
    typology: Typology


def hclust_ward(f: FeatureTable) -> Dendrogram:
    """Ward (squared-increase) linkage on Euclidean distances of the z-scores."""
    if f.n_rows < 2:
        raise PanelValidationError("Clustering needs at least two rows")
    return Dendrogram(linkage(f.z, method='ward'), f.ids)


def wss(x: np.ndarray, labels: np.ndarray) -> float:
    """Within-cluster sum of squared distances to each cluster centroid."""
    total = 0.0
    for code in np.unique(labels):
        members = x[labels == code]
        total += float(((members - members.mean(axis=0)) ** 2).sum())
    return total


def _log_wss_curve(x: np.ndarray, z: np.ndarray, ks: np.ndarray) -> np.ndarray:
    cuts = cut_tree(z, n_clusters=ks)
    w = np.array([wss(x, cuts[:, j]) for j in range(len(ks))])
    return np.log(np.maximum(w, np.finfo(float).tiny))


def elbow_choice(ks: np.ndarray, w: np.ndarray) -> int:
    """k whose normalized WSS point lies farthest above the chord from k=1 to k_max."""
    if len(ks) < 3 or w[0] == w[-1]:
        return int(ks[0])
    x = (ks - ks[0]) / (ks[-1] - ks[0])
    y = (w[0] - w) / (w[0] - w[-1])
    return int(ks[int(np.argmax(y - x))])


def gap_choice(ks: np.ndarray, gap: np.ndarray, se: np.ndarray) -> int:
    """Smallest k with Gap(k) >= Gap(k+1) - s(k+1); k_max when none qualifies."""
    for i in range(len(ks) - 1):
        if gap[i] >= gap[i + 1] - se[i + 1]:
            return int(ks[i])
    return int(ks[-1])


def choose_k(
    f: FeatureTable,
    dendro: Dendrogram,
    k_max: int = 8,
    n_refs: int = GAP_REFERENCES,
    seed: int = 0,
) -> KSelection:
    """
    Evaluate the elbow, silhouette and gap criteria for k = 1..k_max.

    Gap references are drawn uniformly over each feature's observed range and
    clustered with the same Ward linkage; every replicate has its own stream.

    Raises:
        PanelValidationError: k_max outside 2..rows-1 or fewer than 50 references
    """
    if not 2 <= k_max <= f.n_rows - 1:
        raise PanelValidationError(f"k_max must be between 2 and {f.n_rows - 1}, got {k_max}")
    if n_refs < MIN_GAP_REFERENCES:
        raise PanelValidationError(f"Gap statistic needs at least {MIN_GAP_REFERENCES} references")

    x = f.z
    ks = np.arange(1, k_max + 1)
    assignments = cut_tree(dendro.linkage, n_clusters=ks)
    w = np.array([wss(x, assignments[:, j]) for j in range(k_max)])

    sil = np.full(k_max, np.nan)
    for j in range(1, k_max):
        sil[j] = silhouette_score(x, assignments[:, j], metric='euclidean')

    lo, hi = x.min(axis=0), x.max(axis=0)
    ref_logw = np.empty((n_refs, k_max))
    for b, rng in enumerate(substreams(seed, n_refs)):
        ref = rng.uniform(lo, hi, size=x.shape)
        ref_logw[b] = _log_wss_curve(ref, linkage(ref, method='ward'), ks)
    logw = np.log(np.maximum(w, np.finfo(float).tiny))
    gap = ref_logw.mean(axis=0) - logw
    se = ref_logw.std(axis=0) * np.sqrt(1.0 + 1.0 / n_refs)

    choice = {
        'elbow': elbow_choice(ks, w),
        'silhouette': int(ks[1 + int(np.nanargmax(sil[1:]))]),
        'gap': gap_choice(ks, gap, se),
    }
    selection = KSelection(ks, assignments, w, sil, gap, se, choice, n_refs, seed)
    logger.info(selection.note)
    return selection


def _composite(f: FeatureTable) -> np.ndarray:
    cols = []
    for name, sign in COMPOSITE_SIGNS.items():
        if name not in f.raw.columns:
            continue
        values = f.raw[name].to_numpy(dtype=float)
        if name == 'population' and (values > 0).all():
            values = np.log(values)
        sd = values.std(ddof=1)
        if sd > 0:
            cols.append(sign * (values - values.mean()) / sd)
    if not cols:
        return f.z.mean(axis=1)
    return np.mean(cols, axis=0)


def _is_binary(values: pd.Series) -> bool:
    present = values.dropna()
    return not present.empty and set(present.unique()) <= {0, 1}


def profile_table(
    f: FeatureTable,
    labels: np.ndarray,
    k: int,
    reference: Optional[pd.DataFrame] = None,
) -> pd.DataFrame:
    """
    Per-type indicator means, type sizes, and passive descriptors.

    Binary passive descriptors are reported as counts, others as means. The
    reference column averages over `reference` when given, else over `f`.
    """
    data = f.raw.join(f.passive) if not f.passive.empty else f.raw.copy()
    ref = data if reference is None else reference
    rows = {}
    for name in f.names:
        rows[name] = [data[name].to_numpy()[labels == t].mean() for t in range(1, k + 1)] + [ref[name].mean()]
    rows[COUNT_ROW] = [float((labels == t).sum()) for t in range(1, k + 1)] + [float(len(ref))]
    for name in f.passive.columns:
        column = data[name]
        if _is_binary(column):
            values = [column.to_numpy()[labels == t].sum() for t in range(1, k + 1)]
            ref_value = ref[name].sum() if name in ref.columns else np.nan
        else:
            values = [column.to_numpy()[labels == t].mean() for t in range(1, k + 1)]
            ref_value = ref[name].mean() if name in ref.columns else np.nan
        rows[name] = [float(v) for v in values] + [float(ref_value)]
    columns = [f"Type {t}" for t in range(1, k + 1)] + [REFERENCE_COLUMN]
    return pd.DataFrame.from_dict(rows, orient='index', columns=columns)


def cut_and_label(
    dendro: Dendrogram,
    k: int,
    f: FeatureTable,
    reference: Optional[pd.DataFrame] = None,
) -> Typology:
    """
    Cut the tree at k and number the clusters 1..k by descending composite.

    Type 1 has the highest mean composite (least vulnerable); ties keep the
    cut's cluster order.
    """
    codes = dendro.cut(k)
    score = _composite(f)
    means = np.array([score[codes == c].mean() for c in range(k)])
    order = np.argsort(-means, kind='mergesort')
    relabel = np.empty(k, dtype=int)
    relabel[order] = np.arange(1, k + 1)
    labels = relabel[codes]
    typology = Typology(k, f.ids, labels, profile_table(f, labels, k, reference))
    logger.info(f"Typology k={k}: sizes {typology.sizes}")
    return typology


def cluster_features(
    f: FeatureTable,
    k_max: int = 8,
    n_refs: int = GAP_REFERENCES,
    seed: int = 0,
    k: Optional[int] = None,
    reference: Optional[pd.DataFrame] = None,
) -> ClusteringResult:
    """Full typology run; k defaults to the gap-statistic choice."""
    dendro = hclust_ward(f)
    selection = choose_k(f, dendro, k_max=k_max, n_refs=n_refs, seed=seed)
    chosen = selection.choice['gap'] if k is None else k
    return ClusteringResult(dendro, selection, cut_and_label(dendro, chosen, f, reference))


def write_labels(typology: Typology, path: Union[str, Path]) -> Path:
    """Write `fips,type` labels consumable as a grouped-slopes file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    typology.to_frame().to_csv(path, index=False)
    return path
