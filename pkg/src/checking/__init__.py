"""
Individual and collective model checking of population models
"""
from .schedule import PopulationTrajectory, RateSchedule, parse_method, rate_schedule
from .individual import (CslTaChecker, PathProbabilityCurve, check_csl_ta, forward_prob,
                         path_prob_curve, path_prob_curves, path_prob_fixed, threshold_signal)
from .collective import (GaussianEstimate, GlobalEstimate, GlobalFormulaChecker, PathGlobalChecker,
                         ThresholdInterval, VerdictNode, check_global_formula, check_path_global,
                         check_state_global, finite_size_correct, gaussian_interval_prob)
from .oracle import SampledEstimator

__all__ = [
    'PopulationTrajectory',
    'RateSchedule',
    'parse_method',
    'rate_schedule',
    'CslTaChecker',
    'PathProbabilityCurve',
    'check_csl_ta',
    'forward_prob',
    'path_prob_curve',
    'path_prob_curves',
    'path_prob_fixed',
    'threshold_signal',
    'GaussianEstimate',
    'GlobalEstimate',
    'GlobalFormulaChecker',
    'PathGlobalChecker',
    'ThresholdInterval',
    'VerdictNode',
    'check_global_formula',
    'check_path_global',
    'check_state_global',
    'finite_size_correct',
    'gaussian_interval_prob',
    'SampledEstimator',
]
