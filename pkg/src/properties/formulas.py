"""
Boolean state formulae over atomic propositions, as used on automaton edges
"""
from dataclasses import dataclass
from typing import Callable, FrozenSet, Iterable, Mapping, Optional, Tuple

STATE_PREFIX = 'phi_'


def state_indicator_name(state: str) -> str:
    return f"{STATE_PREFIX}{state}"


def indicated_state(atom: str) -> Optional[str]:
    """The agent state named by an indicator atom ``phi_<state>``, else None."""
    if atom.startswith(STATE_PREFIX) and len(atom) > len(STATE_PREFIX):
        return atom[len(STATE_PREFIX):]
    return None


@dataclass(frozen=True)
class StateFormula:
    """Formula of B(AP): constants, atoms, negation, conjunction and disjunction."""
    op: str
    name: Optional[str] = None
    children: Tuple['StateFormula', ...] = ()

    def evaluate(self, valuation: Callable[[str], bool]) -> bool:
        if self.op == 'true':
            return True
        if self.op == 'false':
            return False
        if self.op == 'atom':
            return bool(valuation(self.name))
        if self.op == 'not':
            return not self.children[0].evaluate(valuation)
        if self.op == 'and':
            return all(c.evaluate(valuation) for c in self.children)
        if self.op == 'or':
            return any(c.evaluate(valuation) for c in self.children)
        raise ValueError(f"unknown formula operator '{self.op}'")

    def holds_in_state(self, state: str,
                       props: Optional[Mapping[str, bool]] = None) -> bool:
        """Evaluate with state indicators fixed by ``state`` and other atoms from ``props``."""
        props = props or {}

        def valuation(atom: str) -> bool:
            indicated = indicated_state(atom)
            if indicated is not None:
                return indicated == state
            return props[atom]

        return self.evaluate(valuation)

    def atoms(self) -> FrozenSet[str]:
        if self.op == 'atom':
            return frozenset([self.name])
        result = frozenset()
        for child in self.children:
            result |= child.atoms()
        return result

    def general_atoms(self) -> FrozenSet[str]:
        """Atoms that are not agent-state indicators."""
        return frozenset(a for a in self.atoms() if indicated_state(a) is None)

    def substitute(self, mapping: Mapping[str, 'StateFormula']) -> 'StateFormula':
        if self.op == 'atom':
            return mapping.get(self.name, self)
        if not self.children:
            return self
        children = tuple(c.substitute(mapping) for c in self.children)
        if self.op == 'not':
            return negation(children[0])
        if self.op == 'and':
            return conjunction(*children)
        return disjunction(*children)

    @property
    def is_true(self) -> bool:
        return self.op == 'true'

    @property
    def is_false(self) -> bool:
        return self.op == 'false'

    def __str__(self) -> str:
        if self.op in ('true', 'false'):
            return self.op
        if self.op == 'atom':
            return self.name
        if self.op == 'not':
            return f"!{self.children[0]}"
        joiner = ' & ' if self.op == 'and' else ' | '
        return '(' + joiner.join(str(c) for c in self.children) + ')'


TRUE = StateFormula('true')
FALSE = StateFormula('false')


def atom(name: str) -> StateFormula:
    return StateFormula('atom', name=name)


def state_indicator(state: str) -> StateFormula:
    return atom(state_indicator_name(state))


def negation(f: StateFormula) -> StateFormula:
    if f.op == 'true':
        return FALSE
    if f.op == 'false':
        return TRUE
    if f.op == 'not':
        return f.children[0]
    return StateFormula('not', children=(f,))


def conjunction(*formulas: StateFormula) -> StateFormula:
    parts = []
    for f in formulas:
        if f.op == 'false':
            return FALSE
        if f.op == 'true':
            continue
        parts.extend(f.children if f.op == 'and' else (f,))
    if not parts:
        return TRUE
    return parts[0] if len(parts) == 1 else StateFormula('and', children=tuple(parts))


def disjunction(*formulas: StateFormula) -> StateFormula:
    parts = []
    for f in formulas:
        if f.op == 'true':
            return TRUE
        if f.op == 'false':
            continue
        parts.extend(f.children if f.op == 'or' else (f,))
    if not parts:
        return FALSE
    return parts[0] if len(parts) == 1 else StateFormula('or', children=tuple(parts))


def states_formula(states: Iterable[str]) -> StateFormula:
    """Disjunction of the indicators of ``states`` (false when empty)."""
    return disjunction(*(state_indicator(s) for s in states))
