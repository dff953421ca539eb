"""
Spatial Weights (adjacency parsing, row-normalized W, spectral kernels)
"""

from .adjacency import AdjacencyGraph, normalize_fips, parse_adjacency, read_adjacency
from .spatial_weights import (
    SpatialWeights,
    align_weights,
    from_adjacency_matrix,
    row_normalize,
    spectrum,
    spmv,
)

__all__ = [
    'AdjacencyGraph',
    'normalize_fips',
    'parse_adjacency',
    'read_adjacency',
    'SpatialWeights',
    'align_weights',
    'from_adjacency_matrix',
    'row_normalize',
    'spectrum',
    'spmv',
]
