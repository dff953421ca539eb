"""
County Typology (standardized indicators, Ward clustering, k selection)
"""

from .clustering import (
    ClusteringResult,
    Dendrogram,
    KSelection,
    Typology,
    choose_k,
    cluster_features,
    cut_and_label,
    hclust_ward,
    profile_table,
    write_labels,
    wss,
)
from .features import CLUSTER_FEATURES, FeatureTable, read_features, split_columns, standardize

__all__ = [
    'ClusteringResult',
    'Dendrogram',
    'KSelection',
    'Typology',
    'choose_k',
    'cluster_features',
    'cut_and_label',
    'hclust_ward',
    'profile_table',
    'write_labels',
    'wss',
    'CLUSTER_FEATURES',
    'FeatureTable',
    'split_columns',
    'read_features',
    'standardize',
]
