"""
Tables, Coefficient-plot Data and Run Manifests
"""

from .manifest import RunManifest, sha256_file
from .tables import (
    coefficient_frame,
    coefplot_frame,
    csd_frame,
    decomposition_matrix,
    impacts_frame,
    lincom_frame,
    read_table,
    regression_text,
    statistics_frame,
    summary_statistics,
    write_table,
    write_text,
)

__all__ = [
    'RunManifest',
    'sha256_file',
    'coefficient_frame',
    'coefplot_frame',
    'csd_frame',
    'decomposition_matrix',
    'impacts_frame',
    'lincom_frame',
    'read_table',
    'regression_text',
    'statistics_frame',
    'summary_statistics',
    'write_table',
    'write_text',
]
