"""
Parser for the population model language (.pop files)

Example::

    model epidemic;
    state S I R;
    param k_ext = 0.1;
    population N = 100;
    trans ext : S->I @ k_ext*X_S;
    trans inf : S->I, I->I @ (1/N)*k_inf*X_S*X_I;
    init S = N;
"""
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import sympy
from lark import Token, Tree

from src.dsl import parse_source, syntax_error
from src.errors import DslSyntaxError, ModelValidationError
from src.model.population import AgentClass, GlobalTransition, LocalTransition, PopulationModel
from src.model.rates import N_SYMBOL, RateExpr, parse_rate

logger = logging.getLogger(__name__)


class ModelParser:
    """
    Builds a validated PopulationModel from the statements of a parse tree.

    Statements end with ';' and may appear in any order, except that states
    must be declared before they are referenced.
    """

    def __init__(self, text: str, n_override: Optional[int] = None,
                 param_overrides: Optional[Mapping[str, float]] = None):
        self.text = text
        self.n_override = n_override
        self.param_overrides = dict(param_overrides or {})
        self.name = 'model'
        self.states: List[str] = []
        self.params: Dict[str, float] = {}
        self.population: Optional[Tuple[sympy.Expr, Token]] = None
        self.local: List[LocalTransition] = []
        self.transitions: List[Tuple[str, Tuple[LocalTransition, ...], RateExpr]] = []
        self.init: List[Tuple[str, sympy.Expr, Token]] = []
        self.stats = {'states': 0, 'params': 0, 'transitions': 0, 'local_transitions': 0}

    def parse(self) -> PopulationModel:
        tree = parse_source('model', self.text)
        for statement in tree.children:
            getattr(self, f'_{statement.data}')(statement)
        return self._build()

    def _model_name(self, statement: Tree) -> None:
        self.name = str(statement.children[0])

    def _state(self, token: Token) -> str:
        if token not in self.states:
            raise syntax_error(f"undeclared state '{token}'", token)
        return str(token)

    def _states(self, statement: Tree) -> None:
        for token in statement.children[0].children:
            if token in self.states:
                raise syntax_error(f"duplicate state '{token}'", token)
            if token == 'N' or token.startswith('X_'):
                raise syntax_error(f"reserved name '{token}' used as a state", token)
            self.states.append(str(token))
        self.stats['states'] = len(self.states)

    def _params(self, statement: Tree) -> None:
        for param in statement.children:
            token, tree = param.children
            expr, _ = parse_rate(tree)
            value = expr.subs({sympy.Symbol(k): v for k, v in self.params.items()})
            if value.free_symbols:
                raise syntax_error(f"parameter '{token}' is not a constant", token)
            self.params[str(token)] = float(value)
            self.stats['params'] += 1

    def _population(self, statement: Tree) -> None:
        token, tree = statement.children
        if token != 'N':
            raise syntax_error(f"expected 'N', got '{token}'", token)
        expr, _ = parse_rate(tree)
        self.population = (expr, token)

    def _move(self, move: Tree, default_label: str) -> LocalTransition:
        if move.data == 'plain_move':
            source, target = move.children
            label = default_label
        else:
            source, label_token, target = move.children
            label = str(label_token)
        return LocalTransition(self._state(source), label, self._state(target))

    def _local(self, statement: Tree) -> None:
        for move in statement.children:
            if move.data == 'plain_move':
                raise syntax_error("local transitions need an explicit label 'S -a-> T'", move)
            self._register(self._move(move, default_label=''))

    def _register(self, lt: LocalTransition) -> None:
        if lt not in self.local:
            self.local.append(lt)
            self.stats['local_transitions'] += 1

    def _transition(self, statement: Tree) -> None:
        name_token, *syncs, rate_tree = statement.children
        name = str(name_token)
        if any(existing == name for existing, _, _ in self.transitions):
            raise syntax_error(f"duplicate transition '{name}'", name_token)
        sync: List[LocalTransition] = []
        for item in syncs:
            *multiplicity, move = item.children
            count = 1
            if multiplicity:
                count_token = multiplicity[0].children[0]
                if not count_token.isdigit() or int(count_token) < 1:
                    raise syntax_error("multiplicity must be a positive integer", count_token)
                count = int(count_token)
            lt = self._move(move, default_label=name)
            self._register(lt)
            sync.extend([lt] * count)
        expr, identifiers = parse_rate(rate_tree)
        self._check_identifiers(identifiers)
        text = self.text[rate_tree.meta.start_pos:rate_tree.meta.end_pos]
        self.transitions.append((name, tuple(sync), RateExpr(expr=expr, text=text)))
        self.stats['transitions'] += 1

    def _check_identifiers(self, identifiers: List[Token]) -> None:
        for token in identifiers:
            if token == 'N':
                continue
            if token.startswith('X_'):
                if token[2:] not in self.states:
                    raise syntax_error(f"rate references undeclared variable '{token}'", token)
            elif token not in self.params and token not in self.param_overrides:
                raise syntax_error(f"rate references undefined parameter '{token}'", token)

    def _init(self, statement: Tree) -> None:
        for assignment in statement.children:
            token, tree = assignment.children
            expr, _ = parse_rate(tree)
            self.init.append((self._state(token), expr, token))

    def _population_size(self) -> int:
        if self.n_override is not None:
            return int(self.n_override)
        if self.population is None:
            raise ModelValidationError("population size not declared (use 'population N = ...;')")
        expr, token = self.population
        value = expr.subs({sympy.Symbol(k): v for k, v in self._bound_params().items()})
        if value.free_symbols or not value.is_integer:
            raise DslSyntaxError("population size must be an integer constant",
                                 token.line, token.column)
        return int(value)

    def _bound_params(self) -> Dict[str, float]:
        params = dict(self.params)
        for key, value in self.param_overrides.items():
            if key not in params:
                logger.warning(f"Override for unknown parameter '{key}' ignored")
                continue
            params[key] = float(value)
        return params

    def _build(self) -> PopulationModel:
        if not self.states:
            raise ModelValidationError("model declares no states")
        n = self._population_size()
        params = self._bound_params()
        counts = {s: 0 for s in self.states}
        subs = {N_SYMBOL: n}
        subs.update({sympy.Symbol(k): sympy.nsimplify(v, rational=True) for k, v in params.items()})
        for state, expr, token in self.init:
            value = sympy.nsimplify(expr.subs(subs))
            if value.free_symbols or not value.is_integer:
                raise DslSyntaxError(
                    f"initial count of '{state}' is not an integer: {value}",
                    token.line, token.column,
                )
            counts[state] = int(value)
        if not self.init:
            counts[self.states[0]] = n

        agent = AgentClass(states=tuple(self.states), local_transitions=tuple(self.local))
        transitions = tuple(
            GlobalTransition(name=name, sync_set=sync, rate=rate)
            for name, sync, rate in self.transitions
        )
        model = PopulationModel(
            agent_class=agent,
            transitions=transitions,
            N=n,
            initial_state=tuple(counts[s] for s in self.states),
            params=params,
            name=self.name,
        )
        logger.info(
            f"Parsed model '{self.name}': {self.stats['states']} states, "
            f"{self.stats['transitions']} transitions, N={n}"
        )
        return model


def parse_model(text: str, n: Optional[int] = None,
                params: Optional[Mapping[str, float]] = None) -> PopulationModel:
    """
    Parse model-language source into a validated population model.

    Args:
        text: Source text
        n: Optional override of the declared population size
        params: Optional overrides of declared parameters

    Returns:
        PopulationModel
    """
    return ModelParser(text, n_override=n, param_overrides=params).parse()


def load_model(path: Union[str, Path], n: Optional[int] = None,
               params: Optional[Mapping[str, float]] = None) -> PopulationModel:
    path = Path(path)
    logger.debug(f"Loading model from {path}")
    return parse_model(path.read_text(encoding='utf-8'), n=n, params=params)

