"""
Configuration module for the Population Model Checker
"""
from .settings import (
    SOLVER_CONFIG,
    MODEL_CONFIG,
    CURVE_CONFIG,
    COLLECTIVE_CONFIG,
    MAXENT_CONFIG,
    SSA_CONFIG,
    WORKER_CONFIG,
    DATA_CONFIG,
    LOGGING_CONFIG,
    VERB_METHODS,
    PROJECT_ROOT
)

__all__ = [
    'SOLVER_CONFIG',
    'MODEL_CONFIG',
    'CURVE_CONFIG',
    'COLLECTIVE_CONFIG',
    'MAXENT_CONFIG',
    'SSA_CONFIG',
    'WORKER_CONFIG',
    'DATA_CONFIG',
    'LOGGING_CONFIG',
    'VERB_METHODS',
    'PROJECT_ROOT'
]
