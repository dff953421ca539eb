"""
Balanced Panel Data and Variable Transforms
"""

from .dataset import (
    Column,
    LongRows,
    PanelDataset,
    build_panel,
    coal_predicate,
    entity_predicate,
    panel_from_frame,
    subset,
)
from .transforms import (
    TransformKind,
    VariableTransform,
    apply_transform,
    broadcast_entity,
    first_difference,
    indicator_threshold,
    interaction,
    lag,
    lead,
    log_col,
    sign_part,
)

__all__ = [
    'Column',
    'LongRows',
    'PanelDataset',
    'build_panel',
    'coal_predicate',
    'entity_predicate',
    'panel_from_frame',
    'subset',
    'TransformKind',
    'VariableTransform',
    'apply_transform',
    'broadcast_entity',
    'first_difference',
    'indicator_threshold',
    'interaction',
    'lag',
    'lead',
    'log_col',
    'sign_part',
]
