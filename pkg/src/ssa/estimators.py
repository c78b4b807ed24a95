"""
Statistical estimates of local and collective path probabilities from
independent SSA replications
"""
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.random import Generator
from scipy.stats import norm
from tqdm import tqdm

from config.settings import SSA_CONFIG
from src.errors import UsageError
from src.model.population import PopulationModel
from src.properties.dta import Labelling, OneGDTA, TimedPath, dta_accepts
from src.ssa.gillespie import chained_run, direct_step, gillespie_run, replication_rng
from src.synchronize.product import FINAL_COUNTER, ProductPopulationModel, synchronize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimateWithCI:
    """Proportion estimate with a Wilson score interval."""
    estimate: float
    runs: int
    half_width: float
    lower: float
    upper: float
    successes: int
    confidence: float
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, object]:
        return {
            'estimate': self.estimate,
            'runs': self.runs,
            'successes': self.successes,
            'half_width': self.half_width,
            'lower': self.lower,
            'upper': self.upper,
            'confidence': self.confidence,
            'seed': self.seed,
        }


def wilson_interval(successes: int, runs: int,
                    confidence: Optional[float] = None) -> Tuple[float, float]:
    """Wilson score interval of a binomial proportion."""
    if runs < 1:
        raise ValueError("at least one run is required")
    confidence = confidence or SSA_CONFIG['confidence']
    z = float(norm.ppf(1.0 - (1.0 - confidence) / 2.0))
    p = successes / runs
    denominator = 1.0 + z * z / runs
    center = (p + z * z / (2 * runs)) / denominator
    half = z / denominator * math.sqrt(p * (1 - p) / runs + z * z / (4 * runs * runs))
    return max(0.0, center - half), min(1.0, center + half)


def proportion_estimate(successes: int, runs: int, seed: Optional[int] = None,
                        confidence: Optional[float] = None) -> EstimateWithCI:
    confidence = confidence or SSA_CONFIG['confidence']
    lower, upper = wilson_interval(successes, runs, confidence)
    return EstimateWithCI(
        estimate=successes / runs,
        runs=runs,
        half_width=(upper - lower) / 2,
        lower=lower,
        upper=upper,
        successes=successes,
        confidence=confidence,
        seed=seed,
    )


def _progress(iterable, total: int, desc: str, quiet: bool):
    disable = quiet or not logger.isEnabledFor(logging.INFO)
    return tqdm(iterable, total=total, desc=desc, disable=disable, leave=False)


def _participation(model: PopulationModel):
    """Per transition, the local transitions of its sync set with their multiplicities."""
    table = []
    for t in model.transitions:
        entries = {}
        for lt in t.sync_set:
            entries[lt] = entries.get(lt, 0) + 1
        table.append(list(entries.items()))
    return table


def _tagged_move(table, k: int, state: str, x: np.ndarray, index: Dict[str, int],
                 rng: Generator):
    """Local transition taken by the tagged agent when transition ``k`` fires, if any."""
    count = x[index[state]]
    if count <= 0:
        return None
    u = rng.random()
    acc = 0.0
    for lt, mult in table[k]:
        if lt.source != state:
            continue
        acc += mult / count
        if u < acc:
            return lt
    return None


def tagged_agent_path(model: PopulationModel, s0: str, t0: float, T: float,
                      rng: Generator) -> Optional[TimedPath]:
    """
    Timed path over [t0, t0 + T] of an agent picked uniformly among those in ``s0`` at ``t0``.

    The population evolves untracked on [0, t0]. Returns None when no agent
    is in ``s0`` at ``t0``.
    """
    index = model.variable_index
    x = model.initial_vector
    if t0 > 0:
        x = gillespie_run(model, t0, rng=rng, x0=x).final_state
    if x[index[s0]] < 1:
        return None
    table = _participation(model)
    updates = model.update_matrix
    state = s0
    jumps = []
    t, end = float(t0), float(t0) + float(T)
    while True:
        dt, k = direct_step(model, x, rng)
        if k < 0 or t + dt > end:
            break
        t += dt
        lt = _tagged_move(table, k, state, x, index, rng)
        x = x + updates[k]
        if lt is not None:
            jumps.append((t - t0, lt.label, lt.target))
            state = lt.target
    return TimedPath(initial_state=s0, jumps=tuple(jumps))


def estimate_local_path_prob(model: PopulationModel, d: OneGDTA, s0: str, T, t0: float = 0.0,
                             runs: Optional[int] = None, seed: Optional[int] = None,
                             labelling: Optional[Labelling] = None,
                             quiet: bool = False) -> EstimateWithCI:
    """
    Fraction of tagged-agent paths accepted by ``d``.

    Runs where no agent occupies ``s0`` at ``t0`` are discarded.
    """
    runs = runs or SSA_CONFIG['runs']
    seed = SSA_CONFIG['seed'] if seed is None else seed
    successes, used = 0, 0
    for i in _progress(range(runs), runs, f"SSA {d.name}", quiet):
        path = tagged_agent_path(model, s0, float(t0), float(T), replication_rng(seed, i))
        if path is None:
            continue
        used += 1
        successes += dta_accepts(d, path, float(T), labelling, alphabet=model.agent_class.labels)
    if used == 0:
        raise ValueError(f"no agent in state '{s0}' at t0={t0} in any replication")
    if used < runs:
        logger.warning(f"{runs - used} of {runs} replications had no agent in '{s0}' at t0={t0}")
    return proportion_estimate(successes, used, seed)


def _tagged_product_run(pm: ProductPopulationModel, s0: str, rng: Generator) -> bool:
    """Track one agent over the product states; True when it ends in a final location."""
    times = [float(t) for t in pm.times]
    x = pm.initial_vector.copy()
    start = pm.product.initial_index(s0)
    if x[start] < 1:
        raise UsageError(f"no agent starts in '{s0}'")
    names = pm.product.names
    index = pm.regions[0].variable_index
    state = names[start]
    for model, lo, hi in zip(pm.regions, times, times[1:]):
        table = _participation(model)
        updates = model.update_matrix
        t = lo
        while True:
            dt, k = direct_step(model, x, rng)
            if k < 0 or t + dt > hi:
                break
            t += dt
            lt = _tagged_move(table, k, state, x, index, rng)
            x = x + updates[k]
            if lt is not None:
                state = lt.target
    return pm.product.final_mask()[index[state]]


def estimate_product_path_prob(model: PopulationModel, d: OneGDTA, s0: str, T,
                               runs: Optional[int] = None, seed: Optional[int] = None,
                               quiet: bool = False) -> EstimateWithCI:
    """Local path probability from a tagged agent of the product population model."""
    runs = runs or SSA_CONFIG['runs']
    seed = SSA_CONFIG['seed'] if seed is None else seed
    pm = synchronize(model, d, T, final_counter=False)
    successes = 0
    for i in _progress(range(runs), runs, f"SSA {d.name} x {model.name}", quiet):
        successes += bool(_tagged_product_run(pm, s0, replication_rng(seed, i)))
    return proportion_estimate(successes, runs, seed)


def count_range(interval: Tuple[Fraction, Fraction]) -> Tuple[int, int]:
    """Integer counts inside a population-scale threshold interval."""
    return math.ceil(interval[0]), math.floor(interval[1])


def simulate_final_counts(pm: ProductPopulationModel, horizons: Sequence[float], runs: int,
                          seed: int, quiet: bool = False) -> np.ndarray:
    """X_Final at every horizon, one row per replication."""
    final = pm.regions[0].variable_index[FINAL_COUNTER]
    times = [float(t) for t in pm.times]
    horizons = sorted(float(h) for h in horizons)
    counts = np.empty((runs, len(horizons)))
    for i in _progress(range(runs), runs, f"SSA {pm.product.sliced.name}", quiet):
        _, observed = chained_run(pm.regions, times, replication_rng(seed, i), observe=horizons)
        counts[i] = [x[final] for x in observed]
    return counts


def estimate_global_path_prob(model: PopulationModel, d: OneGDTA,
                              interval: Tuple[Fraction, Fraction], T,
                              runs: Optional[int] = None, seed: Optional[int] = None,
                              horizons: Optional[Sequence[float]] = None,
                              quiet: bool = False) -> Dict[float, EstimateWithCI]:
    """
    Fraction of runs with X_Final(T) in the threshold interval, for each horizon.

    Args:
        model: Base population model
        d: Automaton without free propositions
        interval: Count bounds [a N, b N]
        T: Largest horizon
        runs: Replications
        seed: Master seed
        horizons: Horizons <= T to report (default: T only)

    Returns:
        Mapping horizon -> EstimateWithCI
    """
    runs = runs or SSA_CONFIG['runs']
    seed = SSA_CONFIG['seed'] if seed is None else seed
    horizons = sorted(float(h) for h in (horizons or [T]))
    pm = synchronize(model, d, T)
    counts = simulate_final_counts(pm, horizons, runs, seed, quiet)
    lo, hi = count_range(interval)
    inside = (counts >= lo) & (counts <= hi)
    return {h: proportion_estimate(int(inside[:, k].sum()), runs, seed)
            for k, h in enumerate(horizons)}


def estimate_path_prob(model: PopulationModel, d: OneGDTA, T, s0: Optional[str] = None,
                       interval: Optional[Tuple[Fraction, Fraction]] = None,
                       runs: Optional[int] = None, seed: Optional[int] = None,
                       tagging: str = 'agent', quiet: bool = False) -> EstimateWithCI:
    """
    SSA estimate of a local (``s0``) or collective (``interval``) path probability.

    ``tagging`` selects the local simulator: 'agent' picks a random agent of
    the base model, 'product' tracks one agent of the product model.
    """
    if (s0 is None) == (interval is None):
        raise UsageError("give exactly one of s0 (local) or interval (global)")
    if interval is not None:
        return estimate_global_path_prob(model, d, interval, T, runs, seed, quiet=quiet)[float(T)]
    if tagging == 'product':
        return estimate_product_path_prob(model, d, s0, T, runs, seed, quiet)
    if tagging != 'agent':
        raise UsageError(f"unknown tagging '{tagging}'")
    return estimate_local_path_prob(model, d, s0, T, runs=runs, seed=seed, quiet=quiet)


def simulate_state_counts(model: PopulationModel, members: Sequence[str], t0: float, runs: int,
                          seed: int, quiet: bool = False) -> np.ndarray:
    """Number of agents in ``members`` at ``t0``, one entry per replication."""
    indices = [model.variable_index[s] for s in members]
    counts = np.zeros(runs)
    if not indices:
        return counts
    for i in _progress(range(runs), runs, f"SSA {model.name}@{t0:g}", quiet):
        x = model.initial_vector if t0 <= 0 else \
            gillespie_run(model, t0, rng=replication_rng(seed, i)).final_state
        counts[i] = x[indices].sum()
    return counts


def estimate_state_count_prob(model: PopulationModel, members: Sequence[str],
                              interval: Tuple[Fraction, Fraction], t0: float,
                              runs: Optional[int] = None, seed: Optional[int] = None,
                              quiet: bool = False) -> EstimateWithCI:
    """Fraction of runs where the agents in ``members`` at ``t0`` number within ``interval``."""
    runs = runs or SSA_CONFIG['runs']
    seed = SSA_CONFIG['seed'] if seed is None else seed
    counts = simulate_state_counts(model, members, float(t0), runs, seed, quiet)
    lo, hi = count_range(interval)
    return proportion_estimate(int(((counts >= lo) & (counts <= hi)).sum()), runs, seed)


def empirical_mean(model: PopulationModel, grid: Sequence[float], runs: int, seed: int,
                   quiet: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Sample mean and variance of the population state on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    samples = np.empty((runs, len(grid), len(model.variables)))
    for i in _progress(range(runs), runs, f"SSA {model.name}", quiet):
        samples[i] = gillespie_run(model, float(grid[-1]), seed, i).sample(grid)
    return samples.mean(axis=0), samples.var(axis=0, ddof=1) if runs > 1 else np.zeros(samples.shape[1:])
