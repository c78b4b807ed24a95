"""
ODE engine: adaptive integrator, fluid and central limit equations, moment closure
"""
from .solver import OdeSolution, OdeSystem, integrate
from .fluid import chained_solve, cla_moments, cla_solve, fluid_solve
from .moments import MomentSpec, chained_moment_solve, moment_equations, moment_solve

__all__ = [
    'OdeSolution',
    'OdeSystem',
    'integrate',
    'chained_solve',
    'cla_moments',
    'cla_solve',
    'fluid_solve',
    'MomentSpec',
    'chained_moment_solve',
    'moment_equations',
    'moment_solve',
]
