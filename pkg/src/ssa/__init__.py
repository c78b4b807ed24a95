"""
Stochastic simulation and exact transient analysis used as ground truth
"""
from .gillespie import Trajectory, chained_run, direct_step, gillespie_run, replication_rng
from .estimators import (EstimateWithCI, empirical_mean, estimate_global_path_prob,
                         estimate_local_path_prob, estimate_path_prob, estimate_product_path_prob,
                         estimate_state_count_prob, proportion_estimate, simulate_final_counts,
                         simulate_state_counts, wilson_interval)
from .transient import (TransientDistribution, exact_global_path_prob, exact_state_count_prob,
                        exact_transient, transient)

__all__ = [
    'Trajectory',
    'chained_run',
    'direct_step',
    'gillespie_run',
    'replication_rng',
    'EstimateWithCI',
    'empirical_mean',
    'estimate_global_path_prob',
    'estimate_local_path_prob',
    'estimate_path_prob',
    'estimate_product_path_prob',
    'estimate_state_count_prob',
    'simulate_final_counts',
    'simulate_state_counts',
    'proportion_estimate',
    'wilson_interval',
    'TransientDistribution',
    'exact_global_path_prob',
    'exact_state_count_prob',
    'exact_transient',
    'transient',
]
