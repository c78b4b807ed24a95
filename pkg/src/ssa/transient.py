"""
Exact transient distribution of small population CTMCs by uniformization
"""
import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.stats import poisson

from config.settings import SSA_CONFIG
from src.errors import StateSpaceLimitError
from src.model.population import PopulationModel
from src.properties.dta import OneGDTA
from src.synchronize.product import FINAL_COUNTER, synchronize

logger = logging.getLogger(__name__)

CountState = Tuple[int, ...]


@dataclass(frozen=True)
class TransientDistribution:
    """Probability of each reachable count vector at time ``time``."""
    variables: Tuple[str, ...]
    states: np.ndarray
    probs: np.ndarray
    time: float
    truncation_error: float = 0.0

    def probability(self, predicate: Callable[[np.ndarray], bool]) -> float:
        return float(sum(p for x, p in zip(self.states, self.probs) if predicate(x)))

    def count_prob(self, names: Sequence[str], lo: float, hi: float) -> float:
        """P(lo <= sum of the named components <= hi)."""
        cols = [self.variables.index(n) for n in names]
        totals = self.states[:, cols].sum(axis=1) if cols else np.zeros(len(self.states))
        mask = (totals >= lo) & (totals <= hi)
        return float(self.probs[mask].sum())

    def marginal(self, name: str) -> pd.Series:
        col = self.variables.index(name)
        frame = pd.DataFrame({name: self.states[:, col], 'p': self.probs})
        return frame.groupby(name)['p'].sum()

    def mean(self) -> np.ndarray:
        return self.probs @ self.states

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.states, columns=list(self.variables))
        df['probability'] = self.probs
        return df


def reachable_states(model: PopulationModel, start: Sequence[CountState],
                     cap: Optional[int] = None) -> Dict[CountState, int]:
    """
    Breadth-first enumeration of the count vectors reachable from ``start``.

    Raises:
        StateSpaceLimitError: more than ``cap`` states are reachable
    """
    cap = cap or SSA_CONFIG['state_cap']
    updates = model.update_matrix.astype(int)
    index: Dict[CountState, int] = {}
    queue = deque()
    for x in start:
        if x not in index:
            index[x] = len(index)
            queue.append(x)
    while queue:
        x = queue.popleft()
        rates = model.compiled.exact_rates(np.array(x, dtype=float))
        for k in np.flatnonzero(rates > 0):
            y = tuple(int(v) for v in np.add(x, updates[k]))
            if y in index:
                continue
            if len(index) >= cap:
                raise StateSpaceLimitError(len(index) + 1, cap)
            index[y] = len(index)
            queue.append(y)
    return index


def generator_matrix(model: PopulationModel, index: Dict[CountState, int]) -> sparse.csr_matrix:
    """Sparse infinitesimal generator over the enumerated states."""
    updates = model.update_matrix.astype(int)
    rows, cols, vals = [], [], []
    for x, i in index.items():
        rates = model.compiled.exact_rates(np.array(x, dtype=float))
        for k in np.flatnonzero(rates > 0):
            j = index[tuple(int(v) for v in np.add(x, updates[k]))]
            if j == i:
                continue
            rows.append(i)
            cols.append(j)
            vals.append(float(rates[k]))
    n = len(index)
    q = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    exit_rates = np.asarray(q.sum(axis=1)).ravel()
    return (q - sparse.diags(exit_rates)).tocsr()


def uniformize(q: sparse.csr_matrix, p0: np.ndarray, t: float,
               factor: Optional[float] = None,
               epsilon: Optional[float] = None) -> Tuple[np.ndarray, float]:
    """
    p0 exp(Q t) by uniformization.

    Returns the distribution and the Poisson mass dropped by truncation.
    """
    factor = factor or SSA_CONFIG['uniformization_factor']
    epsilon = epsilon or SSA_CONFIG['poisson_truncation']
    exit_max = float(-q.diagonal().min()) if q.shape[0] else 0.0
    if t <= 0 or exit_max <= 0:
        return p0.copy(), 0.0
    lam = factor * exit_max
    pt = (sparse.identity(q.shape[0], format='csr') + q / lam).T.tocsr()
    mean = lam * t
    right = int(poisson.ppf(1.0 - epsilon, mean))
    weights = poisson.pmf(np.arange(right + 1), mean)
    term = p0.copy()
    result = weights[0] * term
    for k in range(1, right + 1):
        term = pt @ term
        result += weights[k] * term
    dropped = max(0.0, 1.0 - float(weights.sum()))
    logger.debug(f"Uniformization: {q.shape[0]} states, rate {lam:.3g}, {right} terms")
    return result, dropped


def exact_transient(regions: Sequence[PopulationModel], times: Sequence[float],
                    x0: Optional[Sequence[int]] = None,
                    cap: Optional[int] = None) -> TransientDistribution:
    """
    Transient distribution at ``times[-1]`` of region models run back to back.

    Args:
        regions: Population models sharing their variables, one per interval
        times: Interval boundaries, len(regions) + 1 values
        x0: Initial count vector (defaults to the first model's)
        cap: Largest number of states explored per region

    Returns:
        TransientDistribution

    Raises:
        StateSpaceLimitError: a region's reachable set exceeds ``cap``
    """
    start = tuple(int(v) for v in (regions[0].initial_vector if x0 is None else x0))
    dist: Dict[CountState, float] = {start: 1.0}
    dropped = 0.0
    for model, lo, hi in zip(regions, times, times[1:]):
        index = reachable_states(model, list(dist), cap)
        p0 = np.zeros(len(index))
        for x, p in dist.items():
            p0[index[x]] = p
        pt, lost = uniformize(generator_matrix(model, index), p0, float(hi) - float(lo))
        dropped += lost
        dist = {x: float(pt[i]) for x, i in index.items() if pt[i] > 0.0}
    states = np.array(list(dist), dtype=float).reshape(len(dist), len(start))
    return TransientDistribution(
        variables=tuple(regions[0].variables),
        states=states,
        probs=np.array(list(dist.values())),
        time=float(times[-1]),
        truncation_error=dropped,
    )


def transient(model: PopulationModel, t: float, cap: Optional[int] = None) -> TransientDistribution:
    return exact_transient([model], [0.0, t], cap=cap)


def exact_global_path_prob(model: PopulationModel, d: OneGDTA, interval, T,
                           cap: Optional[int] = None) -> float:
    """P(X_Final(T) within ``interval``) from the exact product CTMC."""
    pm = synchronize(model, d, T)
    dist = exact_transient(pm.regions, [float(t) for t in pm.times], cap=cap)
    lo, hi = math.ceil(interval[0]), math.floor(interval[1])
    return dist.count_prob([FINAL_COUNTER], lo, hi)


def exact_state_count_prob(model: PopulationModel, members: Sequence[str], interval, t0: float,
                           cap: Optional[int] = None) -> float:
    """P(agents in ``members`` at ``t0`` number within ``interval``)."""
    dist = transient(model, t0, cap)
    return dist.count_prob(members, math.ceil(interval[0]), math.floor(interval[1]))
