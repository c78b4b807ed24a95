"""
Deterministic timed automata with a single global clock (1gDTA)
"""
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from src.errors import DeterminismError, ModelValidationError, UnknownActionError
from src.properties.clocks import TRUE_CLOCK, ClockConstraint
from src.properties.formulas import TRUE, StateFormula, indicated_state

logger = logging.getLogger(__name__)

Labelling = Callable[[str, str, float], bool]


@dataclass(frozen=True)
class DtaEdge:
    """Edge ``source -(action, formula, constraint)-> target``."""
    source: str
    action: str
    target: str
    formula: StateFormula = TRUE
    constraint: ClockConstraint = TRUE_CLOCK

    def __str__(self) -> str:
        guard = []
        if not self.formula.is_true:
            guard.append(f"when {self.formula}")
        if not self.constraint.is_trivial:
            guard.append(f"if {self.constraint}")
        suffix = (' ' + ' '.join(guard)) if guard else ''
        return f"{self.source} -> {self.target} on {self.action}{suffix}"


@dataclass(frozen=True)
class OneGDTA:
    """
    Deterministic timed automaton with one never-reset clock.

    Attributes:
        name: Automaton name
        states: Locations
        initial: Initial location
        finals: Accepting, absorbing locations
        edges: Explicit edges; every unspecified combination is a self-loop
        props: Formal atomic propositions bound to sub-formulae in CSL-TA
        alphabet: Action alphabet; defaults to the actions occurring on edges
    """
    name: str
    states: Tuple[str, ...]
    initial: str
    finals: FrozenSet[str]
    edges: Tuple[DtaEdge, ...] = ()
    props: Tuple[str, ...] = ()
    alphabet: Optional[FrozenSet[str]] = None
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        declared = set(self.states)
        if self.initial not in declared:
            raise ModelValidationError(f"{self.name}: initial location '{self.initial}' undeclared")
        undeclared = set(self.finals) - declared
        if undeclared:
            raise ModelValidationError(f"{self.name}: final locations {sorted(undeclared)} undeclared")
        for edge in self.edges:
            for endpoint in (edge.source, edge.target):
                if endpoint not in declared:
                    raise ModelValidationError(f"{self.name}: edge '{edge}' uses undeclared '{endpoint}'")
            if edge.source in self.finals and edge.target != edge.source:
                raise ModelValidationError(
                    f"{self.name}: final location '{edge.source}' must be absorbing, "
                    f"found edge '{edge}'"
                )
            unknown = edge.formula.general_atoms() - set(self.props)
            if unknown:
                raise ModelValidationError(
                    f"{self.name}: edge '{edge}' uses undeclared propositions {sorted(unknown)}"
                )
            if self.alphabet is not None and edge.action not in self.alphabet:
                raise UnknownActionError(edge.action)
        if self.check:
            check_determinism(self)

    @property
    def actions(self) -> FrozenSet[str]:
        if self.alphabet is not None:
            return self.alphabet
        return frozenset(e.action for e in self.edges)

    def constants(self) -> FrozenSet[Fraction]:
        result = frozenset()
        for edge in self.edges:
            result |= edge.constraint.constants()
        return result

    def is_final(self, q: str) -> bool:
        return q in self.finals

    def outgoing(self, q: str, action: Optional[str] = None) -> List[DtaEdge]:
        return [e for e in self.edges
                if e.source == q and (action is None or e.action == action)]

    def step(self, q: str, action: str, agent_state: str, x,
             props: Optional[Dict[str, bool]] = None) -> str:
        """Location after ``action`` fires from ``agent_state`` at clock ``x``."""
        props = props or {}
        for edge in self.outgoing(q, action):
            if edge.constraint.holds(x) and edge.formula.holds_in_state(agent_state, props):
                return edge.target
        return q

    def with_alphabet(self, actions: Iterable[str]) -> 'OneGDTA':
        alphabet = frozenset(actions)
        missing = {e.action for e in self.edges} - alphabet
        if missing:
            raise UnknownActionError(sorted(missing)[0])
        return OneGDTA(self.name, self.states, self.initial, self.finals, self.edges,
                       self.props, alphabet, check=False)

    def with_edges(self, edges: Sequence[DtaEdge], props: Optional[Sequence[str]] = None,
                   check: bool = True) -> 'OneGDTA':
        return OneGDTA(self.name, self.states, self.initial, self.finals, tuple(edges),
                       self.props if props is None else tuple(props), self.alphabet, check=check)


def _candidate_clock_values(constants: Iterable[Fraction]) -> List[Fraction]:
    points = sorted({Fraction(0)} | set(constants))
    interior = [(a + b) / 2 for a, b in zip(points, points[1:])]
    return interior + [points[-1] + 1] + points


def _worlds(formulas: Sequence[StateFormula]):
    """Agent states mentioned by indicators (plus 'other') times general-atom assignments."""
    indicated = sorted({s for f in formulas for a in f.atoms()
                        for s in [indicated_state(a)] if s is not None})
    general = sorted(set().union(*(f.general_atoms() for f in formulas)))
    for state in indicated + [None]:
        for values in itertools.product((False, True), repeat=len(general)):
            yield state, dict(zip(general, values))


def _formula_holds(formula: StateFormula, state: Optional[str], props: Dict[str, bool]) -> bool:
    def valuation(name: str) -> bool:
        s = indicated_state(name)
        if s is not None:
            return s == state
        return props[name]

    return formula.evaluate(valuation)


def check_determinism(d: OneGDTA) -> None:
    """
    Verify that no two explicit edges can be enabled together.

    Enumerates agent-state worlds, truth assignments of the general
    propositions and one clock value per region of the edge constants.

    Raises:
        DeterminismError: with the clashing edges and a witness
    """
    by_key: Dict[Tuple[str, str], List[DtaEdge]] = {}
    for edge in d.edges:
        by_key.setdefault((edge.source, edge.action), []).append(edge)

    for (source, action), edges in by_key.items():
        for e1, e2 in itertools.combinations(edges, 2):
            clock_values = _candidate_clock_values(e1.constraint.constants() | e2.constraint.constants())
            shared_x = [x for x in clock_values if e1.constraint.holds(x) and e2.constraint.holds(x)]
            if not shared_x:
                continue
            for state, props in _worlds([e1.formula, e2.formula]):
                if _formula_holds(e1.formula, state, props) and _formula_holds(e2.formula, state, props):
                    witness = {
                        'location': source,
                        'action': action,
                        'state': state if state is not None else '<other>',
                        'props': props,
                        'x': shared_x[0],
                    }
                    raise DeterminismError([e1, e2], witness)


@dataclass(frozen=True)
class TimedPath:
    """
    Timed path of a single agent.

    Attributes:
        initial_state: Agent state at clock value 0
        jumps: (clock value, action, new agent state), clock values non-decreasing
    """
    initial_state: str
    jumps: Tuple[Tuple[float, str, str], ...] = ()

    def __post_init__(self):
        times = [j[0] for j in self.jumps]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("path jump times must be non-decreasing")
        if times and times[0] < 0:
            raise ValueError("path jump times must be non-negative")

    def state_at(self, t: float) -> str:
        state = self.initial_state
        for time, _, target in self.jumps:
            if time > t:
                break
            state = target
        return state


def run(d: OneGDTA, path: TimedPath, horizon: Optional[float] = None,
        labelling: Optional[Labelling] = None,
        alphabet: Optional[Iterable[str]] = None) -> List[str]:
    """
    Locations visited by the run induced by ``path``.

    Args:
        d: Automaton
        path: Timed agent path (clock measured from the start of the path)
        horizon: Ignore jumps after this clock value
        labelling: Truth of proposition ``p`` in agent state ``s`` at clock ``x``
        alphabet: Admissible actions (defaults to the automaton's alphabet)

    Returns:
        Sequence of locations, starting with the initial one
    """
    allowed = frozenset(alphabet) if alphabet is not None else d.actions
    if d.props and labelling is None:
        raise ValueError(f"{d.name} has propositions {list(d.props)}; a labelling is required")
    q = d.initial
    visited = [q]
    state = path.initial_state
    for time, action, target in path.jumps:
        if action not in allowed:
            raise UnknownActionError(action)
        if horizon is not None and time > horizon:
            break
        if not d.is_final(q):
            props = {p: bool(labelling(p, state, time)) for p in d.props} if labelling else {}
            q = d.step(q, action, state, time, props)
        visited.append(q)
        state = target
    return visited


def dta_accepts(d: OneGDTA, path: TimedPath, horizon: Optional[float] = None,
                labelling: Optional[Labelling] = None,
                alphabet: Optional[Iterable[str]] = None) -> bool:
    """True iff the run induced by ``path`` ends in a final location."""
    return d.is_final(run(d, path, horizon, labelling, alphabet)[-1])
