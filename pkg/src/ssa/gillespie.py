"""
Gillespie direct-method simulation of population models
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.random import Generator, Philox, SeedSequence

from src.model.population import PopulationModel

logger = logging.getLogger(__name__)


def replication_rng(seed: int, index: int) -> Generator:
    """Independent stream for replication ``index`` of a run seeded with ``seed``."""
    return Generator(Philox(SeedSequence(seed, spawn_key=(index,))))


@dataclass(frozen=True)
class Trajectory:
    """
    Sample path of a population model.

    Attributes:
        variables: Names of the state components
        initial: State at ``start``
        times: Jump times, strictly increasing
        states: State after each jump
        fired: Name of the transition fired at each jump
        start: Start time
        end: Time horizon
    """
    variables: Tuple[str, ...]
    initial: np.ndarray
    times: np.ndarray
    states: np.ndarray
    fired: Tuple[str, ...]
    start: float
    end: float

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1].copy() if len(self.times) else self.initial.copy()

    def state_at(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(self.times, t, side='right'))
        return self.initial.copy() if k == 0 else self.states[k - 1].copy()

    def sample(self, grid: Sequence[float]) -> np.ndarray:
        return np.array([self.state_at(t) for t in grid])

    def to_frame(self) -> pd.DataFrame:
        times = np.concatenate([[self.start], self.times])
        states = np.vstack([self.initial[None, :], self.states]) if len(self.times) \
            else self.initial[None, :]
        df = pd.DataFrame(states, columns=list(self.variables))
        df.insert(0, 't', times)
        df['fired'] = [''] + list(self.fired)
        return df

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)
        logger.info(f"Saved trajectory with {len(self.times)} jumps to {path}")


def direct_step(model: PopulationModel, x: np.ndarray, rng: Generator) -> Tuple[float, int]:
    """
    Waiting time and index of the next transition; ``(inf, -1)`` when nothing is enabled.
    """
    rates = model.compiled.exact_rates(x)
    total = float(rates.sum())
    if total <= 0.0:
        return float('inf'), -1
    dt = rng.exponential(1.0 / total)
    index = int(np.searchsorted(np.cumsum(rates), rng.random() * total, side='right'))
    return dt, min(index, len(rates) - 1)


def gillespie_run(model: PopulationModel, T: float, seed: int = 0, index: int = 0,
                  x0: Optional[Sequence[float]] = None, t0: float = 0.0,
                  rng: Optional[Generator] = None) -> Trajectory:
    """
    Exact sample path of ``model`` on [t0, t0 + T].

    Args:
        model: Population model
        T: Length of the simulated interval
        seed: Master seed
        index: Replication index (selects an independent stream)
        x0: Initial state over ``model.variables``; defaults to the model's
        t0: Start time
        rng: Use this generator instead of the (seed, index) stream

    Returns:
        Trajectory
    """
    rng = rng or replication_rng(seed, index)
    x = model.initial_vector if x0 is None else np.asarray(x0, dtype=float).copy()
    initial = x.copy()
    updates = model.update_matrix
    t, end = float(t0), float(t0) + float(T)
    times: List[float] = []
    states: List[np.ndarray] = []
    fired: List[str] = []
    while True:
        dt, k = direct_step(model, x, rng)
        if k < 0 or t + dt > end:
            break
        t += dt
        x = x + updates[k]
        times.append(t)
        states.append(x.copy())
        fired.append(model.transitions[k].name)
    return Trajectory(
        variables=tuple(model.variables),
        initial=initial,
        times=np.array(times),
        states=np.array(states).reshape(len(times), len(initial)),
        fired=tuple(fired),
        start=float(t0),
        end=end,
    )


def chained_run(regions: Sequence[PopulationModel], times: Sequence[float], rng: Generator,
                x0: Optional[Sequence[float]] = None,
                observe: Sequence[float] = ()) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Simulate region models back to back over their intervals.

    Returns the state at ``times[-1]`` and the states at each ``observe`` time.
    """
    x = regions[0].initial_vector if x0 is None else np.asarray(x0, dtype=float).copy()
    pending = sorted(float(t) for t in observe)
    observed: List[np.ndarray] = []
    for model, lo, hi in zip(regions, times, times[1:]):
        t, hi = float(lo), float(hi)
        updates = model.update_matrix
        while True:
            dt, k = direct_step(model, x, rng)
            nxt = t + dt if k >= 0 else float('inf')
            while pending and pending[0] < nxt and pending[0] <= hi:
                observed.append(x.copy())
                pending.pop(0)
            if nxt > hi:
                break
            t = nxt
            x = x + updates[k]
    while pending:
        observed.append(x.copy())
        pending.pop(0)
    return x, observed
