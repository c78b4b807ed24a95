"""
Population models: agent classes, global transitions, rates and dynamics
"""
from .rates import RateExpr, falling_factorial, population_symbol, N_SYMBOL
from .population import (
    AgentClass,
    GlobalTransition,
    LocalTransition,
    PopulationModel,
    update_vector,
)
from .dynamics import CompiledModel, diffusion, drift, enabled_transitions, jacobian
from .parser import load_model, parse_model

__all__ = [
    'RateExpr',
    'falling_factorial',
    'population_symbol',
    'N_SYMBOL',
    'AgentClass',
    'GlobalTransition',
    'LocalTransition',
    'PopulationModel',
    'update_vector',
    'CompiledModel',
    'diffusion',
    'drift',
    'enabled_transitions',
    'jacobian',
    'load_model',
    'parse_model',
]
