"""
Time-dependent individual generators driven by the population mean behaviour
"""
import itertools
import logging
import math
import re
from typing import Dict, List, Optional, Tuple

import numpy as np
import sympy

from config.settings import CURVE_CONFIG
from src.errors import UnsupportedRateError, UsageError
from src.model.population import PopulationModel
from src.model.rates import N_SYMBOL, population_symbol
from src.ode.fluid import fluid_solve
from src.ode.moments import MomentSpec, moment_solve
from src.ode.solver import OdeSolution
from src.synchronize.generator import (GeneratorTemplate, generator_entry_expressions,
                                       generator_template)
from src.synchronize.product import ProductAgentClass

logger = logging.getLogger(__name__)

METHOD_PATTERN = re.compile(r'^(fluid|moments|cla|maxent|ssa|exact)(?:\((\d+)\))?$')


def parse_method(method: str) -> Tuple[str, Optional[int]]:
    """Split ``'moments(4)'`` into ``('moments', 4)``; the order is None when absent."""
    match = METHOD_PATTERN.match(method.strip())
    if not match:
        raise UsageError(f"unknown method '{method}'")
    name, order = match.groups()
    return name, int(order) if order else None


class PopulationTrajectory:
    """
    Mean behaviour of the base population over [0, horizon].

    ``fluid`` integrates the fluid limit; ``moments`` integrates the closed
    moment equations of the given order.
    """

    def __init__(self, model: PopulationModel, method: str, horizon: float,
                 order: Optional[int] = None, cfg: Optional[dict] = None):
        self.model = model
        self.method = method
        self.horizon = float(horizon)
        self.order = order or CURVE_CONFIG['moment_order']
        self.spec: Optional[MomentSpec] = None
        if method == 'fluid':
            self.solution: OdeSolution = fluid_solve(model, self.horizon, cfg=cfg)
        elif method == 'moments':
            self.spec = MomentSpec.for_model(model, self.order)
            self.solution = moment_solve(model, self.spec, self.horizon, cfg=cfg)
        else:
            raise ValueError(f"rate schedules support 'fluid' and 'moments', got '{method}'")

    def mean(self, t: float) -> np.ndarray:
        """Expected population counts at time ``t``."""
        if self.method == 'fluid':
            return self.model.N * self.solution(t)
        y = self.solution(t)
        return np.array([y[self.spec.index(self.spec.unit(v))] for v in self.model.variables])


def _taylor_expectation(expr: sympy.Expr, spec: MomentSpec, gens: List[sympy.Symbol]) -> sympy.Expr:
    """E[g(X)] by Taylor expansion of g around the mean, truncated at the closure order."""
    means = {g: spec.mean_symbol(i) for i, g in enumerate(gens)}
    terms = [expr.xreplace(means)]
    for degree in range(2, spec.order + 1):
        for combo in itertools.combinations_with_replacement(range(len(gens)), degree):
            gamma = [0] * len(gens)
            for i in combo:
                gamma[i] += 1
            derivative = expr
            for g, k in zip(gens, gamma):
                if k:
                    derivative = sympy.diff(derivative, g, k)
            if derivative == 0:
                continue
            factorial = math.prod(math.factorial(k) for k in gamma)
            central = spec.central_expression(tuple(gamma))
            if central == 0:
                continue
            terms.append(derivative.xreplace(means) / factorial * central)
    return sympy.Add(*terms)


def expected_entry(expr: sympy.Expr, spec: MomentSpec, gens: List[sympy.Symbol]) -> sympy.Expr:
    """
    Closed-moment estimate of E[expr(X)].

    Polynomial entries map every monomial to its (closed) non-centred moment;
    rational entries are expanded around the mean.
    """
    expr = sympy.cancel(expr)
    if expr.is_polynomial(*gens):
        poly = sympy.Poly(expr, *gens)
        return sympy.Add(*[c * spec.closed_expression(alpha) for alpha, c in poly.terms()])
    try:
        return _taylor_expectation(expr, spec, gens)
    except (TypeError, ValueError, sympy.PolynomialError) as exc:
        raise UnsupportedRateError(str(expr), f"cannot expand generator entry: {exc}") from exc


class RateSchedule:
    """
    t -> Q_j(t), the generator of one tagged agent in region ``j``.

    With ``fluid`` the population state in the rates is N Phi(t); with
    ``moments`` every entry is replaced by its expectation under the closed
    moment approximation.
    """

    def __init__(self, product: ProductAgentClass, population: PopulationTrajectory):
        self.product = product
        self.population = population
        self.model = population.model
        self.templates: List[GeneratorTemplate] = [
            generator_template(product, self.model, j) for j in range(len(product.regions))
        ]
        self._expected = None
        if population.method == 'moments':
            self._expected = [self._compile_expected(j) for j in range(len(product.regions))]

    @property
    def method(self) -> str:
        return self.population.method

    @property
    def horizon(self) -> float:
        return self.population.horizon

    @property
    def size(self) -> int:
        return len(self.product.states)

    def _compile_expected(self, j: int):
        spec = self.population.spec
        gens = [population_symbol(v) for v in self.model.variables]
        entries = generator_entry_expressions(self.product, self.model, j, continuous=False)
        keys = list(entries)
        exprs = [expected_entry(entries[k].subs(N_SYMBOL, self.model.N), spec, gens) for k in keys]
        f = sympy.lambdify([spec.symbols], exprs, modules='numpy') if exprs else None
        rows = np.array([k[0] for k in keys], dtype=np.int64)
        cols = np.array([k[1] for k in keys], dtype=np.int64)
        logger.debug(f"Compiled {len(keys)} expected generator entries for region {j}")
        return rows, cols, f

    def generator(self, j: int, t: float) -> np.ndarray:
        """Generator of region ``j`` at absolute time ``t``."""
        if self._expected is None:
            x = self.population.mean(t)
            rates = self.model.compiled.continuous_rates(x)
            return self.templates[j].matrix(x, rates)
        rows, cols, f = self._expected[j]
        q = np.zeros((self.size, self.size))
        if f is not None:
            values = np.asarray(f(self.population.solution(t)), dtype=float).reshape(-1)
            np.add.at(q, (rows, cols), np.maximum(values, 0.0))
        q[np.diag_indices(self.size)] = -q.sum(axis=1)
        return q


def rate_schedule(p: ProductAgentClass, model: PopulationModel, method: str, horizon: float,
                  population: Optional[PopulationTrajectory] = None,
                  cfg: Optional[dict] = None) -> RateSchedule:
    """
    Build the time-dependent generators of a product agent.

    Args:
        p: Product agent classes
        model: Base population model
        method: 'fluid' or 'moments' / 'moments(m)'
        horizon: Latest absolute time at which generators are needed
        population: Reuse an existing population trajectory covering ``horizon``
        cfg: Solver overrides

    Returns:
        RateSchedule
    """
    name, order = parse_method(method)
    if population is None or population.horizon < horizon or population.method != name \
            or (order is not None and population.order != order):
        population = PopulationTrajectory(model, name, horizon, order, cfg)
    return RateSchedule(p, population)


_population_cache: Dict[Tuple[int, str, Optional[int]], PopulationTrajectory] = {}


def shared_population(model: PopulationModel, method: str, horizon: float,
                      cfg: Optional[dict] = None) -> PopulationTrajectory:
    """Population trajectory reused across properties evaluated on the same model."""
    name, order = parse_method(method)
    key = (id(model), name, order)
    cached = _population_cache.get(key)
    if cached is None or cached.model is not model or cached.horizon < horizon:
        cached = PopulationTrajectory(model, name, horizon, order, cfg)
        _population_cache[key] = cached
    return cached
