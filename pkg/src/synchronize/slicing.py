"""
First three synchronization steps: unique labels, removal of state
conditions and removal of clock constraints by slicing [0, T] into regions
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, List, Tuple

from src.errors import ModelValidationError, UnknownActionError
from src.model.population import AgentClass, LocalTransition, PopulationModel, GlobalTransition
from src.properties.dta import DtaEdge, OneGDTA
from src.properties.formulas import TRUE

logger = logging.getLogger(__name__)


def shared_labels(a: AgentClass) -> FrozenSet[str]:
    """Labels carried by local transitions out of more than one state."""
    return frozenset(label for label in a.labels if len(a.sources_of(label)) > 1)


def unique_label(label: str, source: str) -> str:
    return f"{label}_{source}"


def relabel_local(lt: LocalTransition, shared: FrozenSet[str]) -> LocalTransition:
    if lt.label in shared:
        return LocalTransition(lt.source, unique_label(lt.label, lt.source), lt.target)
    return lt


def relabel_unique(a: AgentClass, d: OneGDTA) -> Tuple[AgentClass, OneGDTA]:
    """
    Make every label identify the source state of its local transitions.

    A label shared by transitions out of s_1..s_m becomes label_s1..label_sm;
    each automaton edge on the shared label is replaced by one edge per new label.

    Args:
        a: Agent class
        d: Automaton over the agent's labels

    Returns:
        The relabelled agent class and automaton
    """
    unknown = {e.action for e in d.edges} - set(a.labels)
    if unknown:
        raise UnknownActionError(sorted(unknown)[0])
    shared = shared_labels(a)
    if not shared:
        return a, d.with_alphabet(a.labels)

    locals_ = tuple(relabel_local(lt, shared) for lt in a.local_transitions)
    clashes = {lt.label for lt in locals_ if lt.label not in a.labels} & (set(a.labels) - shared)
    if clashes:
        raise ModelValidationError(f"relabelling produced clashing labels {sorted(clashes)}")
    agent = AgentClass(states=a.states, local_transitions=locals_)

    edges: List[DtaEdge] = []
    for edge in d.edges:
        if edge.action not in shared:
            edges.append(edge)
            continue
        for source in a.sources_of(edge.action):
            edges.append(DtaEdge(edge.source, unique_label(edge.action, source), edge.target,
                                 edge.formula, edge.constraint))
    relabelled = OneGDTA(d.name, d.states, d.initial, d.finals, tuple(edges), d.props,
                         frozenset(agent.labels), check=False)
    logger.debug(f"Relabelled shared labels {sorted(shared)}")
    return agent, relabelled


def relabel_model(m: PopulationModel, agent: AgentClass) -> PopulationModel:
    """The population model with sync sets expressed over the relabelled agent class."""
    shared = shared_labels(m.agent_class)
    transitions = tuple(
        GlobalTransition(t.name, tuple(relabel_local(lt, shared) for lt in t.sync_set), t.rate,
                         t.counter_updates)
        for t in m.transitions
    )
    return PopulationModel(agent, transitions, m.N, m.initial_state, m.params, m.name,
                           m.counters, m.initial_counters)


def prune_state_conditions(a: AgentClass, d: OneGDTA) -> OneGDTA:
    """
    Drop state formulae from the edges of a relabelled automaton.

    Every label now has a unique source state s; an edge is kept (with formula
    ``true``) iff s satisfies its formula, otherwise it is removed.
    """
    edges = []
    for edge in d.edges:
        if edge.formula.general_atoms():
            raise ModelValidationError(
                f"edge '{edge}' still has propositions {sorted(edge.formula.general_atoms())}; "
                f"resolve them before synchronization"
            )
        sources = a.sources_of(edge.action)
        if len(sources) != 1:
            raise ModelValidationError(f"label '{edge.action}' is not unique to one source state")
        if edge.formula.holds_in_state(sources[0]):
            edges.append(DtaEdge(edge.source, edge.action, edge.target, TRUE, edge.constraint))
    return d.with_edges(edges, check=False)


@dataclass(frozen=True)
class RegionDFA:
    """Constraint-free automaton valid for clock values in ``[start, end)``."""
    start: Fraction
    end: Fraction
    delta: Dict[Tuple[str, str], str] = field(default_factory=dict)

    def step(self, q: str, label: str) -> str:
        return self.delta.get((q, label), q)


@dataclass(frozen=True)
class SlicedProperty:
    """
    Automaton sliced at its clock constants.

    Attributes:
        name: Automaton name
        states: Locations
        initial: Initial location
        finals: Final locations
        alphabet: Unique labels
        times: Region boundaries 0 = t_0 < ... < t_k = T
        regions: One DFA per region
    """
    name: str
    states: Tuple[str, ...]
    initial: str
    finals: FrozenSet[str]
    alphabet: FrozenSet[str]
    times: Tuple[Fraction, ...]
    regions: Tuple[RegionDFA, ...]

    @property
    def horizon(self) -> Fraction:
        return self.times[-1]

    def region_index(self, x) -> int:
        """Region containing clock value ``x`` (half-open, last region closed)."""
        for j, region in enumerate(self.regions):
            if x < region.end:
                return j
        return len(self.regions) - 1

    def prefix(self, horizon) -> 'SlicedProperty':
        """Slicing for a shorter horizon (a prefix of this one)."""
        horizon = Fraction(horizon)
        if horizon <= 0 or horizon > self.horizon:
            raise ValueError(f"horizon {horizon} outside (0, {self.horizon}]")
        regions = []
        for region in self.regions:
            if region.start >= horizon:
                break
            regions.append(RegionDFA(region.start, min(region.end, horizon), region.delta))
        times = tuple([r.start for r in regions] + [horizon])
        return SlicedProperty(self.name, self.states, self.initial, self.finals, self.alphabet,
                              times, tuple(regions))


def slice_by_clock(d: OneGDTA, T) -> SlicedProperty:
    """
    Split [0, T] at the clock constants and keep, per region, the edges
    whose constraint holds in the region interior.

    Explicit self-loops (including those of final locations) are dropped; the
    resulting DFAs complete every missing transition with a self-loop.
    """
    T = Fraction(T)
    constants = sorted(c for c in d.constants() if 0 < c < T)
    times = (Fraction(0), *constants, T)
    regions = []
    for lo, hi in zip(times, times[1:]):
        mid = (lo + hi) / 2
        delta: Dict[Tuple[str, str], str] = {}
        for edge in d.edges:
            if edge.source == edge.target or not edge.constraint.holds(mid):
                continue
            key = (edge.source, edge.action)
            if key in delta and delta[key] != edge.target:
                raise ModelValidationError(
                    f"{d.name}: two edges on '{edge.action}' from '{edge.source}' in [{lo}, {hi})"
                )
            delta[key] = edge.target
        regions.append(RegionDFA(lo, hi, delta))
    sliced = SlicedProperty(
        name=d.name,
        states=d.states,
        initial=d.initial,
        finals=d.finals,
        alphabet=d.actions,
        times=times,
        regions=tuple(regions),
    )
    logger.debug(f"Sliced {d.name} into {len(regions)} regions at {[str(t) for t in times]}")
    return sliced


def prepare_property(a: AgentClass, d: OneGDTA, T) -> Tuple[AgentClass, SlicedProperty]:
    """Run the three preparation steps in order."""
    agent, relabelled = relabel_unique(a, d)
    pruned = prune_state_conditions(agent, relabelled)
    return agent, slice_by_clock(pruned, T)

