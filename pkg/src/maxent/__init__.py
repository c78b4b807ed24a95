"""
Maximum entropy density reconstruction from moments
"""
from .density import MaxEntDensity, MomentConstraints, default_support, interval_prob, reconstruct

__all__ = [
    'MaxEntDensity',
    'MomentConstraints',
    'default_support',
    'interval_prob',
    'reconstruct',
]
