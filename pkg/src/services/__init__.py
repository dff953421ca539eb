"""
Workspace and Estimation Services
"""

from .estimation_service import EstimationService, ModelOutcome, StoredFit, load_fits
from .workspace_service import (
    IngestReport, Workspace, WorkspaceService, load_panel, missingness_report, read_panel_csv, save_panel,
)

__all__ = [
    'EstimationService',
    'IngestReport',
    'ModelOutcome',
    'StoredFit',
    'Workspace',
    'WorkspaceService',
    'load_fits',
    'load_panel',
    'missingness_report',
    'read_panel_csv',
    'save_panel',
]
