"""
Row-normalized Spatial Weight Matrix
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from ..errors import EstimationError, PanelValidationError
from .adjacency import AdjacencyGraph

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SpatialWeights:
    """
    Sparse N×N row-stochastic contiguity operator.

    The eigenvalue spectrum is computed once from the symmetric matrix
    D^{-1/2} A D^{-1/2}, which is similar to W = D^{-1} A, so it is real.
    Isolated nodes keep a zero row and contribute eigenvalue 0.
    """

    ids: Tuple[str, ...]
    matrix: sp.csr_matrix
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    @property
    def isolated(self) -> np.ndarray:
        return np.diff(self.matrix.indptr) == 0

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues.min())

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues.max())

    def feasible_interval(self) -> Tuple[float, float]:
        """Open interval (1/λ_min, 1/λ_max) where I − ρW is nonsingular."""
        lo = 1.0 / self.lambda_min if self.lambda_min < 0 else -1.0
        hi = 1.0 / self.lambda_max if self.lambda_max > 0 else 1.0
        return lo, hi

    def spmv(self, x: np.ndarray) -> np.ndarray:
        """W·x for a length-N vector or an N×k block."""
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise PanelValidationError(f"Dimension mismatch: W is {self.n}×{self.n}, x has {x.shape[0]} rows")
        return self.matrix @ x

    def lag_panel(self, y: np.ndarray) -> np.ndarray:
        """Apply W to every year of an N×T matrix."""
        return self.spmv(y)

    def spectrum(self) -> np.ndarray:
        """Cached real eigenvalues, ascending."""
        return self.eigenvalues

    def logdet(self, rho: float) -> float:
        """ln|I − ρW| = Σ ln(1 − ρλ_i)."""
        vals = 1.0 - rho * self.eigenvalues
        if np.any(vals <= 0):
            return -np.inf
        return float(np.sum(np.log(vals)))

    def logdet_derivatives(self, rho: float) -> Tuple[float, float]:
        """First and second derivative of ln|I − ρW| in ρ."""
        denom = 1.0 - rho * self.eigenvalues
        d1 = -np.sum(self.eigenvalues / denom)
        d2 = -np.sum((self.eigenvalues / denom) ** 2)
        return float(d1), float(d2)

    def operator(self, rho: float) -> sp.csc_matrix:
        """Sparse I − ρW."""
        return (sp.identity(self.n, format='csc') - rho * self.matrix.tocsc()).tocsc()

    def solve(self, rho: float, b: np.ndarray) -> np.ndarray:
        """Solve (I − ρW) x = b by sparse LU."""
        lo, hi = self.feasible_interval()
        if not lo < rho < hi:
            raise EstimationError(f"I - rho*W is singular or outside the stable region at rho={rho}")
        return splu(self.operator(rho)).solve(np.asarray(b, dtype=float))

    def trace_inverse(self, rho: float) -> float:
        """tr((I − ρW)^{-1}) = Σ 1/(1 − ρλ_i)."""
        return float(np.sum(1.0 / (1.0 - rho * self.eigenvalues)))

    def trace_inverse_solve(self, rho: float) -> float:
        """tr((I − ρW)^{-1}) from N sparse solves against the identity."""
        inv = self.solve(rho, np.eye(self.n))
        return float(np.trace(inv))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def save(self, path: Union[str, Path]) -> None:
        """Persist CSR arrays and the spectrum to an .npz file."""
        m = self.matrix
        np.savez(
            path,
            ids=np.array(self.ids),
            data=m.data,
            indices=m.indices,
            indptr=m.indptr,
            eigenvalues=self.eigenvalues,
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'SpatialWeights':
        with np.load(path, allow_pickle=False) as z:
            ids = tuple(str(x) for x in z['ids'])
            n = len(ids)
            matrix = sp.csr_matrix((z['data'], z['indices'], z['indptr']), shape=(n, n))
            return cls(ids, matrix, z['eigenvalues'].copy())


def _symmetric_spectrum(adj: sp.csr_matrix) -> np.ndarray:
    degree = np.asarray(adj.sum(axis=1)).ravel()
    inv_sqrt = np.zeros_like(degree)
    nz = degree > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(degree[nz])
    d = sp.diags(inv_sqrt)
    sym = (d @ adj @ d).toarray()
    return la.eigh(sym, eigvals_only=True)


def from_adjacency_matrix(ids: Sequence[str], adj: sp.spmatrix) -> SpatialWeights:
    """Row-normalize a symmetric binary adjacency matrix."""
    adj = sp.csr_matrix(adj, dtype=float)
    adj = sp.csr_matrix(adj - sp.diags(adj.diagonal()))
    adj.eliminate_zeros()
    degree = np.asarray(adj.sum(axis=1)).ravel()
    scale = np.zeros_like(degree)
    scale[degree > 0] = 1.0 / degree[degree > 0]
    matrix = sp.csr_matrix(sp.diags(scale) @ adj)
    matrix.sort_indices()
    eigenvalues = _symmetric_spectrum(adj)
    n_isolated = int(np.sum(degree == 0))
    if n_isolated:
        logger.warning(f"{n_isolated} isolated nodes keep zero rows in W")
    logger.info(
        f"Built W: N={len(ids)}, nnz={matrix.nnz}, "
        f"lambda range [{eigenvalues.min():.4f}, {eigenvalues.max():.4f}]"
    )
    return SpatialWeights(tuple(ids), matrix, eigenvalues)


def row_normalize(g: AdjacencyGraph, order: Sequence[str]) -> SpatialWeights:
    """
    Build W_ij = 1/deg(i) for neighbors j of i, in the given entity order.

    Entities in `order` absent from the graph become isolated nodes.
    """
    position = {e: i for i, e in enumerate(order)}
    missing = [node for node in g.nodes if node not in position]
    if missing:
        raise PanelValidationError(
            f"Entity order does not cover {len(missing)} graph nodes (e.g. {missing[:5]})"
        )
    rows = []
    cols = []
    for a, b in g.edges:
        ia, ib = position[a], position[b]
        rows.extend((ia, ib))
        cols.extend((ib, ia))
    n = len(order)
    adj = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return from_adjacency_matrix(order, adj)


def spmv(w: SpatialWeights, x: np.ndarray) -> np.ndarray:
    """Sparse product W·x."""
    return w.spmv(x)


def spectrum(w: SpatialWeights) -> np.ndarray:
    """Real eigenvalues of W."""
    return w.spectrum()


def align_weights(w: SpatialWeights, entities: Sequence[str]) -> SpatialWeights:
    """
    Re-express W over a sample of entities, re-normalizing rows.

    Needed when an estimation sample is a strict subset of the entities W was
    built on (for example the coal-county subset).
    """
    if tuple(entities) == w.ids:
        return w
    position = {e: i for i, e in enumerate(w.ids)}
    unknown = [e for e in entities if e not in position]
    if unknown:
        raise PanelValidationError(f"{len(unknown)} sample entities missing from W (e.g. {unknown[:5]})")
    idx = np.array([position[e] for e in entities])
    adj = (w.matrix[idx][:, idx] != 0).astype(float)
    return from_adjacency_matrix(entities, adj)
