"""
Parser for the property language (.prop files)

Example::

    dta D2 {
        init q0; final qf;
        edge q0 -> qb on inf when phi_S if x < 10;
        edge q0 -> qf on inf when phi_S if x >= 10;
    }
    csl Late = P[<=300] >= 0.5 (D2);
    global G = Pr >= 0.8 (frac(D2, 300) in [1/3, 1]);
    check G;
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple, Union

from lark import Token, Tree

from src.dsl import names, parse_source, syntax_error
from src.errors import (DeterminismError, DslSyntaxError, ModelValidationError,
                        PopulationCheckerError, UnknownActionError, UnknownPropertyError,
                        UsageError)
from src.properties import formulas as sf
from src.properties.clocks import (
    TRUE_CLOCK,
    ClockConstraint,
    clock_atom,
    conjunction,
    disjunction,
    mirrored,
)
from src.properties.dta import DtaEdge, OneGDTA
from src.properties.logic import (
    CSL_FALSE,
    CSL_TRUE,
    CslTaFormula,
    GlobalProperty,
    csl_and,
    csl_atom,
    csl_not,
    csl_or,
    global_and,
    global_not,
    global_or,
    prob,
)

logger = logging.getLogger(__name__)

Property = Union[OneGDTA, CslTaFormula, GlobalProperty]


@dataclass
class PropertySet:
    """Named automata, labels, CSL-TA formulae and global properties of one file."""
    labels: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    dtas: Dict[str, OneGDTA] = field(default_factory=dict)
    formulas: Dict[str, CslTaFormula] = field(default_factory=dict)
    globals: Dict[str, GlobalProperty] = field(default_factory=dict)
    checks: List[str] = field(default_factory=list)
    order: List[str] = field(default_factory=list)

    def get(self, name: str) -> Property:
        for table in (self.globals, self.formulas, self.dtas):
            if name in table:
                return table[name]
        raise UnknownPropertyError(name)

    def main(self) -> Property:
        """The property named by the last ``check`` statement, else the last definition."""
        if self.checks:
            return self.get(self.checks[-1])
        if not self.order:
            raise UsageError("property file defines nothing")
        return self.get(self.order[-1])

    def names(self) -> List[str]:
        return list(self.order)


class PropertyParser:
    """Builds a PropertySet from the statements of a parse tree."""

    def __init__(self, text: str):
        self.text = text
        self.result = PropertySet()

    def parse(self) -> PropertySet:
        tree = parse_source('property', self.text)
        for statement in tree.children:
            getattr(self, f'_{statement.data}')(*statement.children)
        logger.info(
            f"Parsed properties: {len(self.result.dtas)} automata, "
            f"{len(self.result.formulas)} CSL-TA formulae, {len(self.result.globals)} global"
        )
        return self.result

    def _define_name(self, token: Token) -> str:
        taken = set(self.result.order) | set(self.result.dtas) | set(self.result.labels)
        if token in taken:
            raise syntax_error(f"'{token}' is already defined", token)
        return str(token)

    def _number(self, tree: Tree) -> Fraction:
        numerator, *denominator = tree.children
        value = Fraction(str(numerator))
        if denominator:
            divisor = Fraction(str(denominator[0]))
            if divisor == 0:
                raise syntax_error("division by zero", numerator)
            value /= divisor
        return value

    # statements -----------------------------------------------------------

    def _label(self, name_token: Token, states: Tree) -> None:
        name = self._define_name(name_token)
        self.result.labels[name] = tuple(names(states))

    def _csl_def(self, name_token: Token, tree: Tree) -> None:
        name = self._define_name(name_token)
        self.result.formulas[name] = _named(self._csl(tree), name)
        self.result.order.append(name)

    def _global_def(self, name_token: Token, tree: Tree) -> None:
        name = self._define_name(name_token)
        self.result.globals[name] = self._global(tree)
        self.result.order.append(name)

    def _check(self, name_token: Token) -> None:
        if name_token not in self.result.order:
            raise syntax_error(f"unknown property '{name_token}'", name_token)
        self.result.checks.append(str(name_token))

    # automata -------------------------------------------------------------

    def _dta(self, name_token: Token, *items: Tree) -> None:
        name = self._define_name(name_token)
        states: List[str] = []
        initial: Optional[str] = None
        finals: List[str] = []
        props: List[str] = []
        alphabet: Optional[List[str]] = None
        edges: List[DtaEdge] = []

        def declare(*qs: str) -> None:
            for q in qs:
                if q not in states:
                    states.append(q)

        for item in items:
            if item.data == 'dta_init':
                initial = str(item.children[0])
                declare(initial)
            elif item.data == 'dta_final':
                finals.extend(names(item.children[0]))
                declare(*finals)
            elif item.data == 'dta_states':
                declare(*names(item.children[0]))
            elif item.data == 'dta_props':
                props.extend(names(item.children[0]))
            elif item.data == 'dta_actions':
                alphabet = names(item.children[0])
            else:
                edge = self._edge(item, set(props))
                declare(edge.source, edge.target)
                edges.append(edge)
        if initial is None:
            raise syntax_error(f"automaton '{name}' has no initial location", name_token)
        try:
            dta = OneGDTA(
                name=name,
                states=tuple(states),
                initial=initial,
                finals=frozenset(finals),
                edges=tuple(edges),
                props=tuple(props),
                alphabet=frozenset(alphabet) if alphabet is not None else None,
            )
        except (DeterminismError, ModelValidationError, UnknownActionError) as e:
            raise DslSyntaxError(str(e), name_token.line, name_token.column) from e
        self.result.dtas[name] = dta

    def _edge(self, item: Tree, props: Set[str]) -> DtaEdge:
        source, target, action, *guards = item.children
        formula = sf.TRUE
        constraint = TRUE_CLOCK
        for guard in guards:
            if guard.data == 'guard':
                formula = self._state_formula(guard.children[0], props)
            else:
                constraint = self._clock(guard.children[0])
        return DtaEdge(str(source), str(action), str(target), formula, constraint)

    def _state_formula(self, tree: Tree, props: Set[str]) -> sf.StateFormula:
        if tree.data in ('s_or', 's_and'):
            parts = [self._state_formula(t, props) for t in _operands(tree)]
            return sf.disjunction(*parts) if tree.data == 's_or' else sf.conjunction(*parts)
        if tree.data == 's_not':
            return sf.negation(self._state_formula(tree.children[0], props))
        if tree.data == 's_true':
            return sf.TRUE
        if tree.data == 's_false':
            return sf.FALSE
        token = tree.children[0]
        if token in props:
            return sf.atom(str(token))
        if token in self.result.labels:
            return sf.states_formula(self.result.labels[token])
        if sf.indicated_state(str(token)) is not None:
            return sf.atom(str(token))
        raise syntax_error(
            f"undeclared proposition '{token}' (declare it with 'props' or use phi_<state>)",
            token,
        )

    def _clock(self, tree: Tree) -> ClockConstraint:
        if tree.data == 'c_or':
            return disjunction(*(self._clock(t) for t in _operands(tree)))
        if tree.data == 'c_and':
            return conjunction(*(self._clock(t) for t in _operands(tree)))
        if tree.data == 'c_not':
            return ~self._clock(tree.children[0])
        if tree.data == 'c_true':
            return TRUE_CLOCK
        if tree.data == 'c_left':
            left, comparator, *rest = tree.children
            constraint = clock_atom(mirrored(_comparator(comparator)), self._number(left))
        else:
            comparator, right, *rest = tree.children
            constraint = clock_atom(_comparator(comparator), self._number(right))
        if rest:
            upper = clock_atom(_comparator(rest[0]), self._number(rest[1]))
            constraint = conjunction(constraint, upper)
        return constraint

    # CSL-TA ---------------------------------------------------------------

    def _csl(self, tree: Tree) -> CslTaFormula:
        if tree.data == 'csl_disj':
            return csl_or(*(self._csl(t) for t in _operands(tree)))
        if tree.data == 'csl_conj':
            return csl_and(*(self._csl(t) for t in _operands(tree)))
        if tree.data == 'csl_neg':
            return csl_not(self._csl(tree.children[0]))
        if tree.data == 'csl_true':
            return CSL_TRUE
        if tree.data == 'csl_false':
            return CSL_FALSE
        if tree.data == 'csl_prob':
            return self._prob_operator(tree)
        return self._csl_reference(tree)

    def _csl_reference(self, application: Tree) -> CslTaFormula:
        token, *args = application.children
        if token in self.result.dtas or token in self.result.globals:
            raise syntax_error(f"'{token}' is not a state formula", token)
        if args:
            raise syntax_error(f"unknown automaton '{token}'", token)
        if token in self.result.formulas:
            return self.result.formulas[token]
        if token in self.result.labels:
            return csl_atom(self.result.labels[token], name=str(token))
        state = sf.indicated_state(str(token)) or str(token)
        return csl_atom([state])

    def _prob_operator(self, tree: Tree) -> CslTaFormula:
        horizon, comparator, bound, application = tree.children
        dta, args = self._dta_application(application)
        try:
            return prob(dta, _comparator(comparator), self._number(bound),
                        self._number(horizon), args)
        except PopulationCheckerError as e:
            raise syntax_error(str(e), tree) from e

    def _dta_application(self, application: Tree) -> Tuple[OneGDTA, List[CslTaFormula]]:
        token, *args = application.children
        if token not in self.result.dtas:
            raise syntax_error(f"unknown automaton '{token}'", token)
        return self.result.dtas[token], [self._csl(arg) for arg in args]

    # global properties ----------------------------------------------------

    def _global(self, tree: Tree) -> GlobalProperty:
        if tree.data == 'glob_disj':
            return global_or(*(self._global(t) for t in _operands(tree)))
        if tree.data == 'glob_conj':
            return global_and(*(self._global(t) for t in _operands(tree)))
        if tree.data == 'glob_neg':
            return global_not(self._global(tree.children[0]))
        if tree.data == 'glob_true':
            return GlobalProperty('true')
        if tree.data == 'glob_false':
            return GlobalProperty('false')
        if tree.data == 'glob_threshold':
            return self._threshold(tree)
        token = tree.children[0]
        if token in self.result.globals:
            return self.result.globals[token]
        raise syntax_error(f"unknown global property '{token}'", token)

    def _threshold(self, tree: Tree) -> GlobalProperty:
        comparator, bound, kind, target, when, interval = tree.children
        counts = kind.children[0] == 'count'
        lower, upper = self._threshold_interval(interval, counts)
        kwargs = dict(comparator=_comparator(comparator), bound=float(self._number(bound)),
                      lower=lower, upper=upper, counts=counts)
        is_path = target.data == 'application' and target.children[0] in self.result.dtas
        try:
            if is_path:
                dta, args = self._dta_application(target)
                return GlobalProperty('path', dta=dta, args=tuple(args),
                                      horizon=self._number(when), **kwargs)
            return GlobalProperty('state', formula=self._csl(target), time=self._number(when),
                                  **kwargs)
        except PopulationCheckerError as e:
            raise syntax_error(str(e), tree) from e

    def _threshold_interval(self, tree: Tree, counts: bool) -> Tuple[Fraction, Optional[Fraction]]:
        if tree.data == 'in_interval':
            lower, upper = tree.children
            return self._number(lower), self._number(upper)
        comparator, value = tree.children
        op = _comparator(comparator)
        if op == '>=':
            return self._number(value), None if counts else Fraction(1)
        if op == '<=':
            return Fraction(0), self._number(value)
        raise syntax_error("thresholds use 'in [a, b]', '>= a' or '<= b'", comparator)


def _operands(tree: Tree) -> List[Tree]:
    """Operands of a left-nested chain of one binary operator."""
    head, tail = tree.children
    left = _operands(head) if isinstance(head, Tree) and head.data == tree.data else [head]
    return left + [tail]


def _comparator(tree: Tree) -> str:
    return str(tree.children[0])


def _named(formula: CslTaFormula, name: str) -> CslTaFormula:
    return CslTaFormula(formula.op, formula.states, formula.children, formula.comparator,
                        formula.bound, formula.horizon, formula.dta, name)


def parse_property(text: str) -> PropertySet:
    """
    Parse property-language source.

    Args:
        text: Source text

    Returns:
        PropertySet; ``.main()`` gives the property selected by ``check``

    Raises:
        DslSyntaxError: on syntax errors and invalid automata, including
            determinism violations (message names the edges and a witness)
    """
    return PropertyParser(text).parse()


def load_properties(path: Union[str, Path]) -> PropertySet:
    path = Path(path)
    logger.debug(f"Loading properties from {path}")
    return parse_property(path.read_text(encoding='utf-8'))
