"""
Payload Models

Pydantic models for law and profile descriptors, experiment configuration
and the JSON reports written next to every CSV output.
"""

from .law_models import LawDescriptor, ProfileDescriptor, ORDERING_ALIASES
from .experiment_models import ExperimentConfig
from .report_models import (
    AnalyticSummary,
    BatchHeader,
    ValidationReport,
    ConvergenceRow,
    FaultReport,
    CommandResult,
)

__all__ = [
    'LawDescriptor',
    'ProfileDescriptor',
    'ORDERING_ALIASES',
    'ExperimentConfig',
    'AnalyticSummary',
    'BatchHeader',
    'ValidationReport',
    'ConvergenceRow',
    'FaultReport',
    'CommandResult',
]
