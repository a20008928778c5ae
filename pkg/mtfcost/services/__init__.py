"""
Application Services

Experiment orchestration behind the command line and the CSV/JSON export
of its results.
"""

from .export_service import ExportService, file_stem
from .experiment_service import ExperimentService, load_config_file, resolve_config

__all__ = ['ExportService', 'ExperimentService', 'file_stem', 'load_config_file', 'resolve_config']
