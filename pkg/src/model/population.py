"""
Agent classes, global transitions and population models
"""
import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.errors import ModelValidationError
from src.model.rates import RateExpr

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LocalTransition:
    """Labelled move of a single agent, ``source -label-> target``."""
    source: str
    label: str
    target: str

    def __str__(self) -> str:
        return f"{self.source} -{self.label}-> {self.target}"


@dataclass(frozen=True)
class AgentClass:
    """
    Finite-state template of an individual agent.

    Attributes:
        states: Ordered state names
        local_transitions: Labelled local transitions between declared states
    """
    states: Tuple[str, ...]
    local_transitions: Tuple[LocalTransition, ...] = ()

    def __post_init__(self):
        if len(set(self.states)) != len(self.states):
            duplicates = [s for s, c in Counter(self.states).items() if c > 1]
            raise ModelValidationError(f"duplicate state names: {duplicates}")
        declared = set(self.states)
        seen = set()
        for lt in self.local_transitions:
            for endpoint in (lt.source, lt.target):
                if endpoint not in declared:
                    raise ModelValidationError(
                        f"local transition {lt} uses undeclared state '{endpoint}'"
                    )
            if lt in seen:
                raise ModelValidationError(
                    f"local transitions {lt} share source, target and label"
                )
            seen.add(lt)

    @cached_property
    def index(self) -> Dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(dict.fromkeys(lt.label for lt in self.local_transitions))

    def sources_of(self, label: str) -> Tuple[str, ...]:
        """States with an outgoing local transition carrying ``label``."""
        return tuple(dict.fromkeys(
            lt.source for lt in self.local_transitions if lt.label == label
        ))


@dataclass(frozen=True)
class GlobalTransition:
    """
    Synchronized firing of a multiset of local transitions.

    Attributes:
        name: Transition name
        sync_set: Local transitions, repeated according to multiplicity
        rate: Global rate function
        counter_updates: Increments of auxiliary counters (e.g. X_Final)
    """
    name: str
    sync_set: Tuple[LocalTransition, ...]
    rate: RateExpr
    counter_updates: Tuple[int, ...] = ()

    def source_multiplicities(self) -> Counter:
        """kappa_s: how many agents in state s the transition consumes."""
        return Counter(lt.source for lt in self.sync_set)

    def multiplicity(self, lt: LocalTransition) -> int:
        return sum(1 for other in self.sync_set if other == lt)


def update_vector(t: GlobalTransition, a: AgentClass) -> np.ndarray:
    """
    Net change in the counting variables when ``t`` fires.

    Each synchronized local move contributes ``e_target - e_source``.

    Args:
        t: Global transition
        a: Agent class the transition is defined over

    Returns:
        Integer vector over ``a.states``
    """
    v = np.zeros(len(a.states), dtype=np.int64)
    for lt in t.sync_set:
        v[a.index[lt.target]] += 1
        v[a.index[lt.source]] -= 1
    return v


@dataclass(frozen=True, eq=False)
class PopulationModel:
    """
    Population of N exchangeable agents of a single class.

    Attributes:
        agent_class: The agent template
        transitions: Global transitions
        N: Population size
        initial_state: Initial counts over ``agent_class.states``
        params: Values for the named parameters used in rates
        name: Model name
        counters: Auxiliary counting variables outside the conservation law
        initial_counters: Initial values of the auxiliary counters
    """
    agent_class: AgentClass
    transitions: Tuple[GlobalTransition, ...]
    N: int
    initial_state: Tuple[int, ...]
    params: Mapping[str, float] = field(default_factory=dict)
    name: str = 'model'
    counters: Tuple[str, ...] = ()
    initial_counters: Tuple[int, ...] = ()

    def __post_init__(self):
        states = self.agent_class.states
        if self.N < 1:
            raise ModelValidationError(f"population size must be positive, got {self.N}")
        if len(self.initial_state) != len(states):
            raise ModelValidationError("initial state does not match the agent states")
        if any(c < 0 for c in self.initial_state):
            raise ModelValidationError(f"negative initial counts: {self.initial_state}")
        if sum(self.initial_state) != self.N:
            raise ModelValidationError(
                f"initial counts sum to {sum(self.initial_state)}, expected N={self.N}"
            )
        if len(self.initial_counters) != len(self.counters):
            raise ModelValidationError("initial counter values do not match the counters")

        known = set(self.agent_class.local_transitions)
        names = set()
        for t in self.transitions:
            if t.name in names:
                raise ModelValidationError(f"duplicate transition name '{t.name}'")
            names.add(t.name)
            for lt in t.sync_set:
                if lt not in known:
                    raise ModelValidationError(
                        f"transition '{t.name}' synchronizes unknown local transition {lt}"
                    )
            undeclared = t.rate.variables() - set(states)
            if undeclared:
                raise ModelValidationError(
                    f"rate of '{t.name}' references undeclared variables "
                    f"{sorted('X_' + v for v in undeclared)}"
                )
            unbound = t.rate.parameters() - set(self.params)
            if unbound:
                raise ModelValidationError(
                    f"rate of '{t.name}' uses undefined parameters {sorted(unbound)}"
                )
            if len(t.counter_updates) not in (0, len(self.counters)):
                raise ModelValidationError(
                    f"transition '{t.name}' has {len(t.counter_updates)} counter updates, "
                    f"expected {len(self.counters)}"
                )

    @property
    def states(self) -> Tuple[str, ...]:
        return self.agent_class.states

    @property
    def variables(self) -> Tuple[str, ...]:
        """Agent states followed by auxiliary counters."""
        return self.agent_class.states + self.counters

    @cached_property
    def variable_index(self) -> Dict[str, int]:
        return {v: i for i, v in enumerate(self.variables)}

    @cached_property
    def update_matrix(self) -> np.ndarray:
        """Update vectors (rows) over all variables, counters included."""
        n_states = len(self.states)
        rows = np.zeros((len(self.transitions), len(self.variables)), dtype=np.int64)
        for i, t in enumerate(self.transitions):
            rows[i, :n_states] = update_vector(t, self.agent_class)
            if t.counter_updates:
                rows[i, n_states:] = t.counter_updates
        return rows

    @cached_property
    def guard_matrix(self) -> np.ndarray:
        """Agents of each state consumed by each transition (kappa_s)."""
        guards = np.zeros((len(self.transitions), len(self.variables)), dtype=np.int64)
        for i, t in enumerate(self.transitions):
            for state, kappa in t.source_multiplicities().items():
                guards[i, self.variable_index[state]] = kappa
        return guards

    @property
    def initial_vector(self) -> np.ndarray:
        return np.array(self.initial_state + self.initial_counters, dtype=float)

    @property
    def initial_density(self) -> np.ndarray:
        return self.initial_vector / self.N

    def bound_rates(self, continuous: bool = False) -> List:
        """Rate expressions with parameters substituted."""
        bound = [t.rate.bind(self.params) for t in self.transitions]
        return [r.continuous_expr if continuous else r.expr for r in bound]

    def transition(self, name: str) -> GlobalTransition:
        for t in self.transitions:
            if t.name == name:
                return t
        raise KeyError(name)

    @cached_property
    def compiled(self):
        from src.model.dynamics import CompiledModel
        return CompiledModel(self)

    def with_initial_state(self, initial_state: Sequence[int],
                           initial_counters: Optional[Sequence[int]] = None) -> 'PopulationModel':
        return PopulationModel(
            agent_class=self.agent_class,
            transitions=self.transitions,
            N=self.N,
            initial_state=tuple(int(c) for c in initial_state),
            params=self.params,
            name=self.name,
            counters=self.counters,
            initial_counters=tuple(initial_counters) if initial_counters is not None
            else self.initial_counters,
        )

    def with_params(self, **params: float) -> 'PopulationModel':
        merged = dict(self.params)
        merged.update(params)
        return PopulationModel(
            agent_class=self.agent_class,
            transitions=self.transitions,
            N=self.N,
            initial_state=self.initial_state,
            params=merged,
            name=self.name,
            counters=self.counters,
            initial_counters=self.initial_counters,
        )

    def describe(self) -> Dict[str, object]:
        return {
            'name': self.name,
            'N': self.N,
            'states': list(self.states),
            'counters': list(self.counters),
            'initial_state': list(self.initial_state),
            'params': dict(self.params),
            'transitions': [
                {
                    'name': t.name,
                    'sync_set': [str(lt) for lt in t.sync_set],
                    'rate': str(t.rate.expr),
                    'counter_updates': list(t.counter_updates),
                }
                for t in self.transitions
            ],
        }
