"""
Configuration Package

Provides centralized configuration management from environment variables.
"""

from .config import get_config, QUADRATURE, INVERSION, EXACT, SIMULATION, STATS, OUTPUT, METRICS, LOGGING

__all__ = [
    'get_config',
    'QUADRATURE',
    'INVERSION',
    'EXACT',
    'SIMULATION',
    'STATS',
    'OUTPUT',
    'METRICS',
    'LOGGING'
]
