"""
Synthetic Data-generating Processes
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from pydantic import BaseModel, Field, field_validator

from ..errors import PanelValidationError
from ..panel.dataset import PanelDataset
from ..typology.features import FeatureTable, standardize
from ..weights.adjacency import FIPS_WIDTH
from ..weights.spatial_weights import SpatialWeights, from_adjacency_matrix
from .rng import make_rng

logger = logging.getLogger(__name__)

DEPENDENT = 'y'


class DgpConfig(BaseModel):
    """Parameters shared by the panel DGPs."""

    n: int = Field(50, ge=2)
    t: int = Field(10, ge=3)
    beta: List[float] = Field(default_factory=lambda: [1.0])
    rho: float = 0.0
    delta: float = 0.0
    n_factors: int = Field(0, ge=0)
    sigma: float = Field(1.0, ge=0)
    fe_scale: float = Field(1.0, ge=0)
    x_alpha_corr: float = Field(0.3, ge=-1, le=1)
    factor_scale: float = Field(1.0, ge=0)
    seed: int = Field(0, ge=0)
    start_year: int = 2002

    @field_validator('beta')
    @classmethod
    def validate_beta(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("beta needs at least one coefficient")
        return v

    @property
    def regressors(self) -> List[str]:
        return [f"x{k + 1}" for k in range(len(self.beta))]


@dataclass(frozen=True, eq=False)
class Truth:
    """True parameters and latent components behind a generated panel."""

    beta: np.ndarray
    alpha: np.ndarray
    gamma: np.ndarray
    rho: float = 0.0
    delta: float = 0.0
    u: Optional[np.ndarray] = field(default=None, repr=False)
    factors: Optional[np.ndarray] = field(default=None, repr=False)
    loadings: Optional[np.ndarray] = field(default=None, repr=False)


def entity_ids(n: int) -> Tuple[str, ...]:
    """Synthetic five-digit FIPS-like identifiers."""
    return tuple(str(i + 1).zfill(FIPS_WIDTH) for i in range(n))


def _panel(cfg: DgpConfig, y: np.ndarray, x: np.ndarray) -> PanelDataset:
    columns: Dict[str, np.ndarray] = {DEPENDENT: y}
    for k, name in enumerate(cfg.regressors):
        columns[name] = x[:, :, k]
    years = tuple(range(cfg.start_year, cfg.start_year + cfg.t))
    return PanelDataset(entity_ids(cfg.n), years, columns, {})


def _effects(cfg: DgpConfig, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Entity effects, year effects and regressors correlated with the entity effects."""
    a = rng.standard_normal(cfg.n)
    alpha = cfg.fe_scale * a
    gamma = cfg.fe_scale * rng.standard_normal(cfg.t)
    c = cfg.x_alpha_corr
    noise = rng.standard_normal((cfg.n, cfg.t, len(cfg.beta)))
    x = c * a[:, None, None] + np.sqrt(1.0 - c * c) * noise
    return alpha, gamma, x


def gen_twfe(cfg: DgpConfig) -> Tuple[PanelDataset, Truth]:
    """y_it = x_it'β + α_i + γ_t + ε_it with corr(x, α) set by the config."""
    rng = make_rng(cfg.seed)
    beta = np.asarray(cfg.beta, dtype=float)
    alpha, gamma, x = _effects(cfg, rng)
    eps = cfg.sigma * rng.standard_normal((cfg.n, cfg.t))
    y = x @ beta + alpha[:, None] + gamma[None, :] + eps
    return _panel(cfg, y, x), Truth(beta, alpha, gamma, u=eps)


def _lattice_shape(n: int) -> Tuple[int, int]:
    for rows in range(int(np.sqrt(n)), 2, -1):
        if n % rows == 0 and n // rows >= 3:
            return rows, n // rows
    raise PanelValidationError(f"Cannot lay {n} entities on a torus with both sides >= 3")


def torus_weights(rows: int, cols: int) -> SpatialWeights:
    """Row-normalized rook contiguity on a rows×cols torus (every node has degree 4)."""
    if rows < 3 or cols < 3:
        raise PanelValidationError("Torus sides must be at least 3")
    n = rows * cols
    idx = np.arange(n).reshape(rows, cols)
    right = np.roll(idx, -1, axis=1).ravel()
    down = np.roll(idx, -1, axis=0).ravel()
    src = np.concatenate([idx.ravel(), idx.ravel()])
    dst = np.concatenate([right, down])
    adj = sp.coo_matrix((np.ones(src.size), (src, dst)), shape=(n, n)).tocsr()
    adj = ((adj + adj.T) > 0).astype(float)
    return from_adjacency_matrix(entity_ids(n), adj)


def random_graph_weights(n: int, mean_degree: float = 4.0, seed: int = 0) -> SpatialWeights:
    """Row-normalized W of an Erdős–Rényi graph with the given expected degree."""
    rng = make_rng(seed)
    p = min(1.0, mean_degree / max(n - 1, 1))
    upper = np.triu(rng.random((n, n)) < p, k=1)
    adj = sp.csr_matrix((upper | upper.T).astype(float))
    return from_adjacency_matrix(entity_ids(n), adj)


def _check_feasible(w: SpatialWeights, name: str, value: float) -> None:
    lo, hi = w.feasible_interval()
    if not lo < value < hi:
        raise PanelValidationError(f"{name} = {value} outside the feasible interval ({lo:.4f}, {hi:.4f})")


def gen_spatial(cfg: DgpConfig, w: Optional[SpatialWeights] = None) -> Tuple[PanelDataset, Truth, SpatialWeights]:
    """
    SARAR panel: y_t = (I−ρW)⁻¹(X_tβ + α + γ_t + u_t), u_t = (I−δW)⁻¹ε_t.

    With no W a torus lattice over the N entities is used. ρ = δ = 0 gives
    the TWFE process.

    Raises:
        PanelValidationError: W size mismatch or infeasible ρ/δ
    """
    if w is None:
        w = torus_weights(*_lattice_shape(cfg.n))
    if w.n != cfg.n:
        raise PanelValidationError(f"W has {w.n} nodes but the config asks for {cfg.n} entities")
    _check_feasible(w, "rho", cfg.rho)
    _check_feasible(w, "delta", cfg.delta)

    rng = make_rng(cfg.seed)
    beta = np.asarray(cfg.beta, dtype=float)
    alpha, gamma, x = _effects(cfg, rng)
    eps = cfg.sigma * rng.standard_normal((cfg.n, cfg.t))
    u = w.solve(cfg.delta, eps) if cfg.delta != 0 else eps
    rhs = x @ beta + alpha[:, None] + gamma[None, :] + u
    y = w.solve(cfg.rho, rhs) if cfg.rho != 0 else rhs
    panel = _panel(cfg, y, x)
    panel = PanelDataset(w.ids, panel.years, dict(panel.columns), {})
    return panel, Truth(beta, alpha, gamma, rho=cfg.rho, delta=cfg.delta, u=u), w


def smooth_factors(t: int, d: int) -> np.ndarray:
    """T×d low-order trigonometric factors."""
    s = (np.arange(t) + 0.5) / t
    return np.column_stack([np.sqrt(2.0) * np.sin(np.pi * (l + 1) * s) for l in range(d)]) if d else np.empty((t, 0))


def gen_factor(cfg: DgpConfig) -> Tuple[PanelDataset, Truth]:
    """TWFE process plus Σ_l λ_il f_l(t) with smooth f; the regressors load on the factors too."""
    rng = make_rng(cfg.seed)
    beta = np.asarray(cfg.beta, dtype=float)
    alpha, gamma, x = _effects(cfg, rng)
    f = smooth_factors(cfg.t, cfg.n_factors)
    lam = cfg.factor_scale * rng.standard_normal((cfg.n, cfg.n_factors))
    common = lam @ f.T
    x = x + 0.5 * common[:, :, None]
    eps = cfg.sigma * rng.standard_normal((cfg.n, cfg.t))
    y = x @ beta + alpha[:, None] + gamma[None, :] + common + eps
    return _panel(cfg, y, x), Truth(beta, alpha, gamma, u=eps, factors=f, loadings=lam)


def gen_blobs(k: int = 3, n: int = 90, sigma: float = 0.1, sep: float = 10.0, seed: int = 0) -> FeatureTable:
    """
    k isotropic gaussian blobs whose centers are pairwise `sep` apart.

    The planted blob (1..k) is carried as the passive column `planted`.
    """
    if sep <= 0 or k < 1 or n < k:
        raise PanelValidationError("Blobs need sep > 0 and at least one point per blob")
    rng = make_rng(seed)
    dim = max(k, 2)
    centers = np.zeros((k, dim))
    centers[:, :k] = np.eye(k) * sep / np.sqrt(2.0)
    planted = np.arange(n) % k
    points = centers[planted] + sigma * rng.standard_normal((n, dim))
    frame = pd.DataFrame(points, columns=[f"f{j + 1}" for j in range(dim)])
    frame.insert(0, 'fips', entity_ids(n))
    frame['planted'] = planted + 1
    return standardize(frame, columns=[f"f{j + 1}" for j in range(dim)], passive=['planted'])


def weights_edges(w: SpatialWeights) -> pd.DataFrame:
    """Undirected edge list (fips_a < fips_b) of a weight matrix."""
    coo = sp.triu(w.matrix, k=1).tocoo()
    ids = np.asarray(w.ids)
    return pd.DataFrame({'fips_a': ids[coo.row], 'fips_b': ids[coo.col]})


def dump_csvs(
    out_dir: Union[str, Path],
    panel: Optional[PanelDataset] = None,
    w: Optional[SpatialWeights] = None,
    features: Optional[FeatureTable] = None,
) -> Dict[str, Path]:
    """Write generated data to the standard panel/adjacency/features CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: Dict[str, Path] = {}
    if panel is not None:
        written['panel'] = out / 'panel.csv'
        panel.to_frame().to_csv(written['panel'], index=False)
    if w is not None:
        written['adjacency'] = out / 'adjacency.csv'
        weights_edges(w).to_csv(written['adjacency'], index=False)
    if features is not None:
        written['features'] = out / 'features.csv'
        frame = features.raw.join(features.passive).reset_index()
        frame.to_csv(written['features'], index=False)
    for kind, path in written.items():
        logger.info(f"Wrote synthetic {kind} to {path}")
    return written
