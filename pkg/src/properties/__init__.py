"""
Path properties (1gDTA), CSL-TA state formulae and collective properties
"""
from .clocks import ClockConstraint, TRUE_CLOCK, clock_atom, interval_constraint
from .formulas import StateFormula, state_indicator
from .dta import DtaEdge, OneGDTA, TimedPath, check_determinism, dta_accepts
from .signals import BooleanSignal, signal_combine, structural_resolution
from .logic import CslTaFormula, GlobalProperty
from .parser import PropertySet, load_properties, parse_property

__all__ = [
    'ClockConstraint',
    'TRUE_CLOCK',
    'clock_atom',
    'interval_constraint',
    'StateFormula',
    'state_indicator',
    'DtaEdge',
    'OneGDTA',
    'TimedPath',
    'check_determinism',
    'dta_accepts',
    'BooleanSignal',
    'signal_combine',
    'structural_resolution',
    'CslTaFormula',
    'GlobalProperty',
    'PropertySet',
    'load_properties',
    'parse_property',
]
