"""
Workspace Run Registry
"""

from .database import init_db, make_engine, make_session_factory, registry_url, session_scope
from .models import Base, FitRecord, InputFile, OutputRecord, Run

__all__ = [
    'Base',
    'FitRecord',
    'InputFile',
    'OutputRecord',
    'Run',
    'init_db',
    'make_engine',
    'make_session_factory',
    'registry_url',
    'session_scope',
]
