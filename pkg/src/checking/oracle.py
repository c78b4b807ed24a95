"""
Atom estimators for global properties backed by simulation or exact transient analysis
"""
import logging
from typing import Optional

import numpy as np

from config.settings import SSA_CONFIG
from src.errors import UsageError
from src.model.population import PopulationModel
from src.properties.logic import GlobalProperty
from src.ssa.estimators import (count_range, proportion_estimate, simulate_final_counts,
                                simulate_state_counts)
from src.ssa.transient import exact_transient, transient
from src.synchronize.product import FINAL_COUNTER, synchronize
from src.checking.collective import (GlobalEstimate, finite_size_correct, resolve_args,
                                     satisfying_states)

logger = logging.getLogger(__name__)


class SampledEstimator:
    """
    Estimates atom probabilities by SSA replications ('ssa') or by uniformization ('exact').

    Instances are callables GlobalProperty -> GlobalEstimate and can be handed
    to GlobalFormulaChecker as its estimator.
    """

    def __init__(self, model: PopulationModel, method: str = 'ssa', runs: Optional[int] = None,
                 seed: Optional[int] = None, local_method: str = 'fluid', quiet: bool = False):
        if method not in ('ssa', 'exact'):
            raise UsageError(f"method '{method}' is not a sampling method")
        self.model = model
        self.method = method
        self.runs = runs or SSA_CONFIG['runs']
        self.seed = SSA_CONFIG['seed'] if seed is None else seed
        self.local_method = local_method
        self.quiet = quiet

    def __call__(self, atom: GlobalProperty) -> GlobalEstimate:
        bounds = atom.count_bounds(self.model.N)
        interval = finite_size_correct(bounds, self.model.N, correct=False)
        lo, hi = count_range(bounds)
        if atom.op == 'path':
            T = float(atom.horizon)
            d, warnings = resolve_args(self.model, atom.dta, atom.args, T, self.local_method)
            pm = synchronize(self.model, d, atom.horizon)
            if self.method == 'exact':
                dist = exact_transient(pm.regions, [float(t) for t in pm.times])
                return self._from_distribution(dist, [FINAL_COUNTER], lo, hi, interval, T, warnings)
            counts = simulate_final_counts(pm, [T], self.runs, self.seed, self.quiet)[:, 0]
            return self._from_counts(counts, lo, hi, interval, T, warnings)

        t0 = float(atom.time)
        members, warnings = satisfying_states(self.model, atom.formula, t0, self.local_method)
        if self.method == 'exact':
            dist = transient(self.model, t0)
            result = self._from_distribution(dist, members, lo, hi, interval, t0, warnings)
        else:
            counts = simulate_state_counts(self.model, members, t0, self.runs, self.seed, self.quiet)
            result = self._from_counts(counts, lo, hi, interval, t0, warnings)
        result.diagnostics['satisfying_states'] = members
        return result

    def _from_counts(self, counts: np.ndarray, lo: int, hi: int, interval, time: float,
                     warnings) -> GlobalEstimate:
        ci = proportion_estimate(int(((counts >= lo) & (counts <= hi)).sum()), len(counts), self.seed)
        variance = float(counts.var(ddof=1)) if len(counts) > 1 else 0.0
        return GlobalEstimate(ci.estimate, 'ssa', interval, float(counts.mean()), variance, time,
                              list(warnings), {'confidence_interval': ci.to_dict()})

    @staticmethod
    def _from_distribution(dist, names, lo: int, hi: int, interval, time: float,
                           warnings) -> GlobalEstimate:
        cols = [dist.variables.index(n) for n in names]
        totals = dist.states[:, cols].sum(axis=1) if cols else np.zeros(len(dist.states))
        mean = float(dist.probs @ totals)
        variance = float(dist.probs @ (totals - mean) ** 2)
        probability = dist.count_prob(names, lo, hi)
        return GlobalEstimate(probability, 'exact', interval, mean, variance, time, list(warnings),
                              {'states': int(len(dist.states)),
                               'truncation_error': dist.truncation_error})
