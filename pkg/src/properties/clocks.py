"""
Clock constraints over the single global clock x
"""
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import FrozenSet, Optional, Tuple

COMPARATORS = ('<', '<=', '>', '>=')

_NEGATED = {'<': '>=', '<=': '>', '>': '<=', '>=': '<'}
_MIRRORED = {'<': '>', '<=': '>=', '>': '<', '>=': '<='}


def compare(value: Real, comparator: str, bound: Real) -> bool:
    """``value <comparator> bound`` for one of <, <=, >, >=."""
    if comparator == '<':
        return value < bound
    if comparator == '<=':
        return value <= bound
    if comparator == '>':
        return value > bound
    if comparator == '>=':
        return value >= bound
    raise ValueError(f"unknown comparator '{comparator}'")


@dataclass(frozen=True)
class ClockConstraint:
    """
    Boolean combination of basic constraints ``x ~ c``.

    Constants are exact rationals; ``holds`` accepts any real clock value.
    """
    op: str
    comparator: Optional[str] = None
    constant: Optional[Fraction] = None
    children: Tuple['ClockConstraint', ...] = ()

    def holds(self, x: Real) -> bool:
        if self.op == 'true':
            return True
        if self.op == 'false':
            return False
        if self.op == 'atom':
            return compare(x, self.comparator, self.constant)
        if self.op == 'not':
            return not self.children[0].holds(x)
        if self.op == 'and':
            return all(c.holds(x) for c in self.children)
        if self.op == 'or':
            return any(c.holds(x) for c in self.children)
        raise ValueError(f"unknown clock constraint operator '{self.op}'")

    def constants(self) -> FrozenSet[Fraction]:
        if self.op == 'atom':
            return frozenset([self.constant])
        result = frozenset()
        for child in self.children:
            result |= child.constants()
        return result

    @property
    def is_trivial(self) -> bool:
        return self.op == 'true'

    def __and__(self, other: 'ClockConstraint') -> 'ClockConstraint':
        return conjunction(self, other)

    def __invert__(self) -> 'ClockConstraint':
        if self.op == 'atom':
            return clock_atom(_NEGATED[self.comparator], self.constant)
        if self.op == 'true':
            return FALSE_CLOCK
        if self.op == 'false':
            return TRUE_CLOCK
        if self.op == 'not':
            return self.children[0]
        return ClockConstraint('not', children=(self,))

    def __str__(self) -> str:
        if self.op in ('true', 'false'):
            return self.op
        if self.op == 'atom':
            return f"x {self.comparator} {self.constant}"
        if self.op == 'not':
            return f"!({self.children[0]})"
        joiner = ' & ' if self.op == 'and' else ' | '
        return '(' + joiner.join(str(c) for c in self.children) + ')'


TRUE_CLOCK = ClockConstraint('true')
FALSE_CLOCK = ClockConstraint('false')


def clock_atom(comparator: str, constant) -> ClockConstraint:
    if comparator not in COMPARATORS:
        raise ValueError(f"unknown comparator '{comparator}'")
    constant = Fraction(constant)
    if constant < 0:
        raise ValueError(f"clock constants must be non-negative, got {constant}")
    return ClockConstraint('atom', comparator=comparator, constant=constant)


def mirrored(comparator: str) -> str:
    """Comparator with operands swapped: ``c < x`` becomes ``x > c``."""
    return _MIRRORED[comparator]


def conjunction(*constraints: ClockConstraint) -> ClockConstraint:
    parts = []
    for c in constraints:
        if c.op == 'false':
            return FALSE_CLOCK
        if c.op == 'true':
            continue
        parts.extend(c.children if c.op == 'and' else (c,))
    if not parts:
        return TRUE_CLOCK
    return parts[0] if len(parts) == 1 else ClockConstraint('and', children=tuple(parts))


def disjunction(*constraints: ClockConstraint) -> ClockConstraint:
    parts = []
    for c in constraints:
        if c.op == 'true':
            return TRUE_CLOCK
        if c.op == 'false':
            continue
        parts.extend(c.children if c.op == 'or' else (c,))
    if not parts:
        return FALSE_CLOCK
    return parts[0] if len(parts) == 1 else ClockConstraint('or', children=tuple(parts))


def interval_constraint(lo, hi=None) -> ClockConstraint:
    """``lo <= x < hi``; unbounded above when ``hi`` is None."""
    lower = clock_atom('>=', lo) if Fraction(lo) > 0 else TRUE_CLOCK
    if hi is None:
        return lower
    return conjunction(lower, clock_atom('<', hi))
