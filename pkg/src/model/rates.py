"""
Symbolic rate expressions for population models
"""
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import sympy
from lark import Token, Transformer, Tree, v_args
from lark.exceptions import VisitError

from src.dsl import syntax_error

logger = logging.getLogger(__name__)

N_SYMBOL = sympy.Symbol('N', positive=True)


def population_symbol(name: str) -> sympy.Symbol:
    """Counting variable symbol X_<name>."""
    return sympy.Symbol(f'X_{name}', nonnegative=True)


def falling_factorial(x: sympy.Expr, k: int) -> sympy.Expr:
    """x (x-1) ... (x-k+1) as an expanded polynomial; 1 for k = 0."""
    result = sympy.Integer(1)
    for h in range(k):
        result *= (x - h)
    return sympy.expand(result)


@dataclass(frozen=True)
class RateExpr:
    """
    Rate function of a global transition.

    ``expr`` is the exact rate over counting variables ``X_s``, the population
    size ``N`` and named parameters. ``continuous`` optionally gives the
    large-population form used by the fluid, CLA and moment engines; it
    defaults to ``expr``.
    """
    expr: sympy.Expr
    text: str = ''
    continuous: Optional[sympy.Expr] = field(default=None, compare=False)

    @property
    def continuous_expr(self) -> sympy.Expr:
        return self.expr if self.continuous is None else self.continuous

    def variables(self) -> FrozenSet[str]:
        """Names of the states whose counting variables occur in the rate."""
        names = set()
        for sym in self.expr.free_symbols | self.continuous_expr.free_symbols:
            if sym.name.startswith('X_'):
                names.add(sym.name[2:])
        return frozenset(names)

    def parameters(self) -> FrozenSet[str]:
        return frozenset(
            sym.name for sym in self.expr.free_symbols
            if sym != N_SYMBOL and not sym.name.startswith('X_')
        )

    def bind(self, params: Mapping[str, float]) -> 'RateExpr':
        """Substitute parameter values, keeping N and counting variables symbolic."""
        subs = {sympy.Symbol(name): sympy.nsimplify(value, rational=True)
                for name, value in params.items()}
        return RateExpr(
            expr=self.expr.subs(subs),
            text=self.text,
            continuous=None if self.continuous is None else self.continuous.subs(subs),
        )

    def is_polynomial(self, states: Sequence[str], continuous: bool = False) -> bool:
        expr = self.continuous_expr if continuous else self.expr
        gens = [population_symbol(s) for s in states]
        return bool(sympy.cancel(expr).is_polynomial(*gens))

    def evaluate(self, counts: Mapping[str, float], n: float,
                 params: Optional[Mapping[str, float]] = None) -> float:
        """Evaluate at a single state (slow path, used for checks and tests)."""
        subs = {population_symbol(s): v for s, v in counts.items()}
        subs[N_SYMBOL] = n
        for name, value in (params or {}).items():
            subs[sympy.Symbol(name)] = value
        return float(self.expr.subs(subs))

    def __str__(self) -> str:
        return self.text or str(self.expr)


@v_args(inline=True)
class RateTransformer(Transformer):
    """
    Builds a sympy expression from an ``expr`` subtree of the model grammar.

    Numbers are kept as exact rationals; exponents must be integers.
    """

    def __init__(self):
        super().__init__()
        self.identifiers: List[Token] = []

    def number(self, token: Token) -> sympy.Expr:
        value = Fraction(str(token))
        return sympy.Rational(value.numerator, value.denominator)

    def symbol(self, token: Token) -> sympy.Expr:
        self.identifiers.append(token)
        if token == 'N':
            return N_SYMBOL
        if token.startswith('X_'):
            return population_symbol(token[2:])
        return sympy.Symbol(str(token))

    def group(self, inner: sympy.Expr) -> sympy.Expr:
        return inner

    def add(self, left, right):
        return left + right

    def sub(self, left, right):
        return left - right

    def mul(self, left, right):
        return left * right

    def div(self, left, right):
        return left / right

    def neg(self, operand):
        return -operand

    def exponent(self, *tokens: Token) -> int:
        digits = tokens[-1]
        if not digits.isdigit():
            raise syntax_error(f"exponent must be an integer, got '{digits}'", digits)
        return -int(digits) if len(tokens) == 2 else int(digits)

    def pow(self, base, exponent: int):
        return base ** exponent


def parse_rate(tree: Tree) -> Tuple[sympy.Expr, List[Token]]:
    """
    Convert one parsed rate expression to sympy.

    Returns:
        The sympy expression and the identifier tokens it referenced
    """
    transformer = RateTransformer()
    try:
        expr = transformer.transform(tree)
    except VisitError as e:
        raise e.orig_exc from None
    return sympy.sympify(expr), transformer.identifiers


def compile_rates(exprs: Sequence[sympy.Expr], variables: Sequence[str]):
    """
    Lambdify a list of rate expressions into ``f(x, n) -> list``.

    Args:
        exprs: Expressions over ``X_<variable>`` and ``N`` (parameters bound)
        variables: Order of the state vector ``x``
    """
    syms = [population_symbol(v) for v in variables]
    return sympy.lambdify([syms, N_SYMBOL], list(exprs), modules='numpy')


def compile_gradients(exprs: Sequence[sympy.Expr], variables: Sequence[str]):
    """Lambdify the gradient of every expression: ``f(x, n) -> nested list``."""
    syms = [population_symbol(v) for v in variables]
    grads = [[sympy.diff(e, s) for s in syms] for e in exprs]
    return sympy.lambdify([syms, N_SYMBOL], grads, modules='numpy')


def symbols_for(states: Iterable[str]) -> Dict[str, sympy.Symbol]:
    return {s: population_symbol(s) for s in states}
