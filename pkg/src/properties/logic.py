"""
CSL-TA state formulae and collective (global) properties
"""
from dataclasses import dataclass
from fractions import Fraction
from typing import FrozenSet, Iterable, Optional, Tuple

from src.errors import ModelValidationError
from src.properties.clocks import COMPARATORS, compare
from src.properties.dta import OneGDTA


def satisfies_bound(value: float, comparator: str, bound: float) -> bool:
    return compare(value, comparator, bound)


@dataclass(frozen=True)
class CslTaFormula:
    """
    CSL-TA formula node.

    ``op`` is one of 'true', 'false', 'atom', 'not', 'and', 'or', 'prob'.
    Atoms denote sets of agent states. A 'prob' node is
    ``P[<=horizon] comparator bound (dta[children...])``, the children being
    bound positionally to the automaton's propositions.
    """
    op: str
    states: FrozenSet[str] = frozenset()
    children: Tuple['CslTaFormula', ...] = ()
    comparator: Optional[str] = None
    bound: Optional[float] = None
    horizon: Optional[Fraction] = None
    dta: Optional[OneGDTA] = None
    name: Optional[str] = None

    def __post_init__(self):
        if self.op == 'prob':
            if self.comparator not in COMPARATORS:
                raise ModelValidationError(f"invalid probability comparator '{self.comparator}'")
            if not 0.0 <= self.bound <= 1.0:
                raise ModelValidationError(f"probability bound {self.bound} outside [0, 1]")
            if self.horizon is None or self.horizon <= 0:
                raise ModelValidationError(f"time horizon must be positive, got {self.horizon}")
            if self.dta is None:
                raise ModelValidationError("probability operator without automaton")
            if len(self.children) != len(self.dta.props):
                raise ModelValidationError(
                    f"automaton {self.dta.name} expects {len(self.dta.props)} sub-formulae, "
                    f"got {len(self.children)}"
                )

    @property
    def is_time_varying(self) -> bool:
        """Whether the satisfying set may depend on the evaluation time."""
        if self.op == 'prob':
            return True
        return any(c.is_time_varying for c in self.children)

    def state_names(self) -> FrozenSet[str]:
        result = frozenset(self.states)
        for child in self.children:
            result |= child.state_names()
        return result

    def validate(self, states: Iterable[str]) -> None:
        unknown = self.state_names() - set(states)
        if unknown:
            raise ModelValidationError(f"formula refers to unknown agent states {sorted(unknown)}")

    def __str__(self) -> str:
        if self.name:
            return self.name
        if self.op in ('true', 'false'):
            return self.op
        if self.op == 'atom':
            return '{' + ','.join(sorted(self.states)) + '}'
        if self.op == 'not':
            return f"!{self.children[0]}"
        if self.op in ('and', 'or'):
            joiner = ' & ' if self.op == 'and' else ' | '
            return '(' + joiner.join(str(c) for c in self.children) + ')'
        args = ','.join(str(c) for c in self.children)
        inner = f"{self.dta.name}[{args}]" if args else self.dta.name
        return f"P[<={self.horizon}] {self.comparator} {self.bound} ({inner})"


CSL_TRUE = CslTaFormula('true')
CSL_FALSE = CslTaFormula('false')


def csl_atom(states: Iterable[str], name: Optional[str] = None) -> CslTaFormula:
    return CslTaFormula('atom', states=frozenset(states), name=name)


def csl_not(f: CslTaFormula) -> CslTaFormula:
    return CslTaFormula('not', children=(f,))


def csl_and(*fs: CslTaFormula) -> CslTaFormula:
    return CslTaFormula('and', children=tuple(fs))


def csl_or(*fs: CslTaFormula) -> CslTaFormula:
    return CslTaFormula('or', children=tuple(fs))


def prob(dta: OneGDTA, comparator: str, bound: float, horizon,
         args: Iterable[CslTaFormula] = (), name: Optional[str] = None) -> CslTaFormula:
    return CslTaFormula('prob', children=tuple(args), comparator=comparator, bound=float(bound),
                        horizon=Fraction(horizon), dta=dta, name=name)


@dataclass(frozen=True)
class GlobalProperty:
    """
    Collective property node.

    ``op`` is one of 'true', 'false', 'not', 'and', 'or', 'path', 'state'.

    * 'path': ``Pr comparator bound (frac(dta[args], horizon) in [lower, upper])``,
      the fraction (or count) of agents whose path satisfies the automaton.
    * 'state': ``Pr comparator bound (frac(formula, time) in [lower, upper])``,
      the fraction (or count) of agents satisfying a CSL-TA formula at ``time``.
    """
    op: str
    children: Tuple['GlobalProperty', ...] = ()
    comparator: Optional[str] = None
    bound: Optional[float] = None
    dta: Optional[OneGDTA] = None
    args: Tuple[CslTaFormula, ...] = ()
    formula: Optional[CslTaFormula] = None
    lower: Fraction = Fraction(0)
    upper: Optional[Fraction] = Fraction(1)
    counts: bool = False
    horizon: Optional[Fraction] = None
    time: Fraction = Fraction(0)
    name: Optional[str] = None

    def __post_init__(self):
        if self.op not in ('path', 'state'):
            return
        if self.comparator not in COMPARATORS:
            raise ModelValidationError(f"invalid probability comparator '{self.comparator}'")
        if not 0.0 <= self.bound <= 1.0:
            raise ModelValidationError(f"probability bound {self.bound} outside [0, 1]")
        if self.lower < 0 or (self.upper is not None and self.lower > self.upper):
            raise ModelValidationError(f"threshold interval [{self.lower}, {self.upper}] is invalid")
        if not self.counts and (self.upper is None or self.upper > 1):
            raise ModelValidationError(f"fraction threshold {self.upper} exceeds 1")
        if self.op == 'path':
            if self.dta is None or self.horizon is None or self.horizon <= 0:
                raise ModelValidationError("path threshold needs an automaton and a positive horizon")
            if len(self.args) != len(self.dta.props):
                raise ModelValidationError(
                    f"automaton {self.dta.name} expects {len(self.dta.props)} sub-formulae"
                )
        elif self.formula is None or self.time < 0:
            raise ModelValidationError("state threshold needs a formula and a time >= 0")

    def count_bounds(self, n: int) -> Tuple[Fraction, Fraction]:
        """Threshold interval at population scale."""
        if self.counts:
            upper = n if self.upper is None else min(self.upper, n)
            return Fraction(self.lower), Fraction(upper)
        return self.lower * n, self.upper * n

    def atoms(self) -> Tuple['GlobalProperty', ...]:
        if self.op in ('path', 'state'):
            return (self,)
        return tuple(a for c in self.children for a in c.atoms())

    def __str__(self) -> str:
        if self.op in ('true', 'false'):
            return self.op
        if self.op == 'not':
            return f"!{self.children[0]}"
        if self.op in ('and', 'or'):
            joiner = ' & ' if self.op == 'and' else ' | '
            return '(' + joiner.join(str(c) for c in self.children) + ')'
        kind = 'count' if self.counts else 'frac'
        if self.op == 'path':
            args = ','.join(str(a) for a in self.args)
            target = f"{self.dta.name}[{args}]" if args else self.dta.name
            where = self.horizon
        else:
            target = str(self.formula)
            where = self.time
        upper = 'N' if self.upper is None else self.upper
        return (f"Pr {self.comparator} {self.bound} ({kind}({target}, {where}) "
                f"in [{self.lower}, {upper}])")


GLOBAL_TRUE = GlobalProperty('true')


def global_not(p: GlobalProperty) -> GlobalProperty:
    return GlobalProperty('not', children=(p,))


def global_and(*ps: GlobalProperty) -> GlobalProperty:
    return GlobalProperty('and', children=tuple(ps))


def global_or(*ps: GlobalProperty) -> GlobalProperty:
    return GlobalProperty('or', children=tuple(ps))
