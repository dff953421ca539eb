"""
Seeded Synthetic Panels, Weight Matrices and Planted Clusters
"""

from .generators import (
    DgpConfig,
    Truth,
    dump_csvs,
    entity_ids,
    gen_blobs,
    gen_factor,
    gen_spatial,
    gen_twfe,
    random_graph_weights,
    smooth_factors,
    torus_weights,
    weights_edges,
)
from .rng import make_rng, substreams

__all__ = [
    'DgpConfig',
    'Truth',
    'dump_csvs',
    'entity_ids',
    'gen_blobs',
    'gen_factor',
    'gen_spatial',
    'gen_twfe',
    'random_graph_weights',
    'smooth_factors',
    'torus_weights',
    'weights_edges',
    'make_rng',
    'substreams',
]
