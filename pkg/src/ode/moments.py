"""
Moment equations from the Dynkin formula with low-dispersion closure
"""
import itertools
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy

from src.errors import UnsupportedRateError
from src.model.population import PopulationModel
from src.model.rates import N_SYMBOL, population_symbol
from src.ode.solver import OdeSolution, OdeSystem, integrate

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]

CLOSURE_RULE = 'low-dispersion'


def multi_indices(dimension: int, order: int) -> List[MultiIndex]:
    """All multi-indices of total degree 1..order, degree-major."""
    result = []
    for degree in range(1, order + 1):
        for combo in itertools.combinations_with_replacement(range(dimension), degree):
            alpha = [0] * dimension
            for i in combo:
                alpha[i] += 1
            result.append(tuple(alpha))
    return result


def _sub_indices(alpha: MultiIndex):
    return itertools.product(*(range(a + 1) for a in alpha))


def _binomial(alpha: MultiIndex, gamma: MultiIndex) -> int:
    result = 1
    for a, g in zip(alpha, gamma):
        result *= comb(a, g)
    return result


@dataclass(eq=False)
class MomentSpec:
    """
    Non-centred moments tracked up to a closure order.

    Attributes:
        variables: Names of the population variables
        order: Closure order m; central moments above m are taken as zero
        monomials: Tracked multi-indices (every degree-1 index included)
        closure: Name of the closure rule
    """
    variables: Tuple[str, ...]
    order: int
    monomials: Tuple[MultiIndex, ...] = ()
    closure: str = CLOSURE_RULE
    _symbols: Dict[MultiIndex, sympy.Symbol] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"closure order must be >= 1, got {self.order}")
        self.variables = tuple(self.variables)
        if not self.monomials:
            self.monomials = tuple(multi_indices(len(self.variables), self.order))
        units = {tuple(int(i == j) for j in range(len(self.variables)))
                 for i in range(len(self.variables))}
        missing = units - set(self.monomials)
        if missing:
            raise ValueError(f"degree-1 moments missing: {sorted(missing)}")
        if any(sum(a) > self.order for a in self.monomials):
            raise ValueError(f"monomials above closure order {self.order}")
        self._symbols = {a: sympy.Symbol(f"M_{'_'.join(map(str, a))}") for a in self.monomials}

    @classmethod
    def for_model(cls, m: PopulationModel, order: int) -> 'MomentSpec':
        return cls(variables=tuple(m.variables), order=order)

    @property
    def symbols(self) -> List[sympy.Symbol]:
        return [self._symbols[a] for a in self.monomials]

    def index(self, alpha: MultiIndex) -> int:
        return self.monomials.index(tuple(alpha))

    def unit(self, variable: str, power: int = 1) -> MultiIndex:
        i = self.variables.index(variable)
        return tuple(power if j == i else 0 for j in range(len(self.variables)))

    def label(self, alpha: MultiIndex) -> str:
        factors = [v if a == 1 else f"{v}^{a}" for v, a in zip(self.variables, alpha) if a]
        return f"E[{'*'.join(factors)}]"

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(self.label(a) for a in self.monomials)

    def mean_symbol(self, i: int) -> sympy.Symbol:
        return self._symbols[tuple(int(i == j) for j in range(len(self.variables)))]

    def closed_expression(self, alpha: MultiIndex) -> sympy.Expr:
        """Non-centred moment E[X^alpha] in terms of the tracked moments."""
        return _closed(self, tuple(alpha))

    def central_expression(self, gamma: MultiIndex) -> sympy.Expr:
        """Central moment E[(X - mu)^gamma]; zero above the closure order."""
        return _central(self, tuple(gamma))

    def initial_values(self, x0: Sequence[float]) -> np.ndarray:
        """Moments of the point mass at ``x0`` (all central moments zero)."""
        x0 = np.asarray(x0, dtype=float)
        return np.array([float(np.prod(x0 ** np.array(a))) for a in self.monomials])


@lru_cache(maxsize=None)
def _central(spec: MomentSpec, gamma: MultiIndex) -> sympy.Expr:
    degree = sum(gamma)
    if degree == 0:
        return sympy.Integer(1)
    if degree == 1 or degree > spec.order:
        return sympy.Integer(0)
    terms = []
    for delta in _sub_indices(gamma):
        coefficient = _binomial(gamma, delta)
        mean_part = sympy.Integer(1)
        for i, (g, dl) in enumerate(zip(gamma, delta)):
            if g - dl:
                mean_part *= (-spec.mean_symbol(i)) ** (g - dl)
        raw = sympy.Integer(1) if sum(delta) == 0 else spec._symbols[delta]
        terms.append(coefficient * mean_part * raw)
    return sympy.expand(sympy.Add(*terms))


@lru_cache(maxsize=None)
def _closed(spec: MomentSpec, alpha: MultiIndex) -> sympy.Expr:
    if sum(alpha) == 0:
        return sympy.Integer(1)
    if alpha in spec._symbols:
        return spec._symbols[alpha]
    # E[X^alpha] = sum_gamma C(alpha, gamma) mu^(alpha - gamma) E[(X - mu)^gamma]
    terms = []
    for gamma in _sub_indices(alpha):
        central = _central(spec, gamma)
        if central == 0:
            continue
        mean_part = sympy.Integer(1)
        for i, (a, g) in enumerate(zip(alpha, gamma)):
            if a - g:
                mean_part *= spec.mean_symbol(i) ** (a - g)
        terms.append(_binomial(alpha, gamma) * mean_part * central)
    return sympy.expand(sympy.Add(*terms))


def _polynomial_rates(m: PopulationModel) -> List[sympy.Poly]:
    gens = [population_symbol(v) for v in m.variables]
    polys = []
    for t, expr in zip(m.transitions, m.bound_rates()):
        expr = sympy.cancel(expr.subs(N_SYMBOL, m.N))
        if not expr.is_polynomial(*gens):
            raise UnsupportedRateError(t.name)
        leftover = expr.free_symbols - set(gens)
        if leftover:
            raise UnsupportedRateError(t.name, f"unbound symbols {sorted(map(str, leftover))}")
        polys.append(sympy.Poly(expr, *gens))
    return polys


def moment_expressions(m: PopulationModel, spec: MomentSpec) -> Dict[MultiIndex, sympy.Expr]:
    """
    Right-hand sides d/dt E[X^beta] = E[sum_tau f_tau(X) ((X + v_tau)^beta - X^beta)]
    with moments above the closure order replaced by their closed form.

    Raises:
        UnsupportedRateError: a rate is not polynomial in the population variables
    """
    if tuple(spec.variables) != tuple(m.variables):
        raise ValueError("moment spec does not match the model variables")
    gens = [population_symbol(v) for v in m.variables]
    rates = _polynomial_rates(m)
    updates = m.update_matrix
    equations = {}
    for beta in spec.monomials:
        monomial = sympy.Mul(*[g ** b for g, b in zip(gens, beta)])
        generator = sympy.Integer(0)
        for rate, v in zip(rates, updates):
            if not v.any():
                continue
            shifted = sympy.Mul(*[(g + int(dv)) ** b for g, dv, b in zip(gens, v, beta)])
            generator += rate.as_expr() * (shifted - monomial)
        poly = sympy.Poly(sympy.expand(generator), *gens)
        rhs = sympy.Add(*[c * spec.closed_expression(alpha)
                          for alpha, c in poly.terms()])
        equations[beta] = sympy.expand(rhs)
    logger.debug(f"Derived {len(equations)} moment equations of order {spec.order} for {m.name}")
    return equations


def moment_equations(m: PopulationModel, spec: MomentSpec) -> OdeSystem:
    """
    Closed moment equations of ``m`` as an ODE system over ``spec.monomials``.

    Args:
        m: Population model with polynomial rates
        spec: Tracked moments and closure order

    Returns:
        OdeSystem with one component per tracked moment
    """
    expressions = moment_expressions(m, spec)
    ordered = [expressions[a] for a in spec.monomials]
    f = sympy.lambdify([spec.symbols], ordered, modules='numpy')

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return np.asarray(f(y), dtype=float).reshape(-1)

    return OdeSystem(dimension=len(spec.monomials), rhs=rhs, labels=spec.labels)


def moment_solve(m: PopulationModel, spec: MomentSpec, T: float,
                 y0: Optional[Sequence[float]] = None, t0: float = 0.0,
                 cfg: Optional[dict] = None) -> OdeSolution:
    """Integrate the closed moment equations from a deterministic initial state."""
    y0 = spec.initial_values(m.initial_vector) if y0 is None else np.asarray(y0, dtype=float)
    solution = integrate(moment_equations(m, spec), t0, t0 + T, y0, cfg)
    logger.info(
        f"Moment equations of {m.name} (order {spec.order}) on [{t0:g}, {t0 + T:g}]: "
        f"{solution.stats['steps']} steps, {solution.stats['rejected']} rejected"
    )
    return solution


def chained_moment_solve(regions: Sequence[PopulationModel], times: Sequence[float], order: int,
                         cfg: Optional[dict] = None) -> Tuple[MomentSpec, OdeSolution]:
    """Moment equations region by region over the product models of a property."""
    spec = MomentSpec.for_model(regions[0], order)
    solution: Optional[OdeSolution] = None
    y = None
    for model, lo, hi in zip(regions, times, times[1:]):
        piece = moment_solve(model, spec, float(hi) - float(lo), y0=y, t0=float(lo), cfg=cfg)
        solution = piece if solution is None else solution.concatenate(piece)
        y = piece.y_end
    return spec, solution


def raw_moments(solution: OdeSolution, spec: MomentSpec, variable: str, t: float) -> np.ndarray:
    """E[X_v^k] for k = 1..order at time ``t``."""
    y = solution(t)
    return np.array([y[spec.index(spec.unit(variable, k))] for k in range(1, spec.order + 1)])


def mean_and_covariance(solution: OdeSolution, spec: MomentSpec,
                        t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Mean vector and (for order >= 2) covariance matrix at time ``t``."""
    y = solution(t)
    d = len(spec.variables)
    mean = np.array([y[spec.index(spec.unit(v))] for v in spec.variables])
    cov = np.zeros((d, d))
    if spec.order >= 2:
        for i in range(d):
            for j in range(d):
                alpha = [0] * d
                alpha[i] += 1
                alpha[j] += 1
                cov[i, j] = y[spec.index(tuple(alpha))] - mean[i] * mean[j]
    return mean, cov
