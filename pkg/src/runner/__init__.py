"""
Command-line orchestration: run configuration and verification pipeline
"""
from .config import RunConfig
from .pipeline import (EXIT_NUMERICAL, EXIT_OK, EXIT_STRICT, EXIT_USAGE, VerificationPipeline,
                       exit_code_for, run)

__all__ = [
    'RunConfig',
    'EXIT_NUMERICAL',
    'EXIT_OK',
    'EXIT_STRICT',
    'EXIT_USAGE',
    'VerificationPipeline',
    'exit_code_for',
    'run',
]
