"""
Collective (global) properties: Gaussian and moment-based estimation of the
fraction of agents satisfying a path or state property
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import ndtr
from scipy.stats import norm

from config.settings import COLLECTIVE_CONFIG, CURVE_CONFIG
from src.errors import (GlobalCheckError, MaxEntConvergenceError, MomentFeasibilityError,
                        PopulationCheckerError, UsageError)
from src.maxent.density import MomentConstraints, default_support, reconstruct
from src.model.population import PopulationModel
from src.ode.fluid import chained_solve, cla_moments, cla_solve
from src.ode.moments import MomentSpec, chained_moment_solve, moment_solve, raw_moments
from src.properties.dta import OneGDTA
from src.properties.logic import CslTaFormula, GlobalProperty, satisfies_bound
from src.properties.signals import structural_resolution
from src.synchronize.product import FINAL_COUNTER, ProductPopulationModel, synchronize
from src.checking.individual import check_csl_ta
from src.checking.schedule import parse_method

logger = logging.getLogger(__name__)

DEGENERATE_VARIANCE = 1e-9


@dataclass(frozen=True)
class GaussianEstimate:
    """Normal approximation of a population count at time ``time``."""
    mean: float
    variance: float
    time: float = 0.0

    def __post_init__(self):
        if self.variance < -DEGENERATE_VARIANCE:
            raise ValueError(f"negative variance {self.variance}")

    @property
    def std(self) -> float:
        return math.sqrt(max(self.variance, 0.0))

    def raw_moments(self, order: int) -> Tuple[float, ...]:
        dist = norm(loc=self.mean, scale=max(self.std, 1e-300))
        return tuple(float(dist.moment(k)) for k in range(1, order + 1))


@dataclass(frozen=True)
class ThresholdInterval:
    """
    Threshold [lower, upper] at population scale and the numeric bounds integrated.

    ``empty`` marks a corrected interval containing no integer count.
    """
    lower: Fraction
    upper: Fraction
    corrected_lower: float
    corrected_upper: float
    corrected: bool = False
    empty: bool = False

    def to_dict(self) -> Dict[str, object]:
        return {
            'lower': str(self.lower),
            'upper': str(self.upper),
            'corrected_lower': self.corrected_lower,
            'corrected_upper': self.corrected_upper,
            'corrected': self.corrected,
            'empty': self.empty,
        }


def finite_size_correct(interval: Tuple[Fraction, Fraction], N: int,
                        correct: bool = True) -> ThresholdInterval:
    """
    Integration bounds for a count threshold [a, b] (population scale).

    With the correction the lower bound becomes ceil(a) - 1/2 and the upper
    floor(b) + 1/2; a lower ceiling of 0 opens the interval to -inf and an
    upper floor of N opens it to +inf.
    """
    a, b = Fraction(interval[0]), Fraction(interval[1])
    if a > b:
        raise ValueError(f"threshold interval [{a}, {b}] is empty")
    if not correct:
        return ThresholdInterval(a, b, float(a), float(b), corrected=False)
    j = math.ceil(a)
    k = math.floor(b)
    lo = -math.inf if j <= 0 else j - 0.5
    hi = math.inf if k >= N else k + 0.5
    if j > k:
        logger.warning(f"Threshold [{a}, {b}] contains no integer count for N={N}")
        return ThresholdInterval(a, b, lo, hi, corrected=True, empty=True)
    return ThresholdInterval(a, b, lo, hi, corrected=True)


def gaussian_interval_prob(g: GaussianEstimate, lo: float, hi: float) -> float:
    """Mass of N(mean, variance) on [lo, hi]; an indicator when the variance vanishes."""
    if lo > hi:
        raise ValueError(f"interval [{lo}, {hi}] is empty")
    if g.variance <= DEGENERATE_VARIANCE:
        return float(lo <= g.mean <= hi)
    sd = g.std
    upper = 1.0 if hi == math.inf else float(ndtr((hi - g.mean) / sd))
    lower = 0.0 if lo == -math.inf else float(ndtr((lo - g.mean) / sd))
    return float(np.clip(upper - lower, 0.0, 1.0))


@dataclass
class GlobalEstimate:
    """Estimated probability that the count lies in the threshold interval."""
    probability: float
    method: str
    interval: ThresholdInterval
    mean: float
    variance: float
    time: float
    warnings: List[str] = field(default_factory=list)
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {
            'probability': self.probability,
            'method': self.method,
            'interval': self.interval.to_dict(),
            'mean': self.mean,
            'variance': self.variance,
            'time': self.time,
            'warnings': list(self.warnings),
            'diagnostics': dict(self.diagnostics),
        }


def _moment_estimate(moments: Sequence[float], N: int, interval: ThresholdInterval,
                     warnings: List[str], context: str) -> Tuple[float, Dict[str, object]]:
    """Integrate the max-entropy reconstruction, falling back to a Gaussian on failure."""
    mean = float(moments[0])
    variance = float(moments[1] - moments[0] ** 2) if len(moments) >= 2 else 0.0
    gaussian = GaussianEstimate(mean, max(variance, 0.0))
    if gaussian.variance <= DEGENERATE_VARIANCE:
        return gaussian_interval_prob(gaussian, interval.corrected_lower,
                                      interval.corrected_upper), {'reconstruction': 'degenerate'}
    support = default_support(mean, variance, N)
    try:
        density = reconstruct(MomentConstraints(tuple(moments), support))
    except (MaxEntConvergenceError, MomentFeasibilityError) as exc:
        message = f"{context}: max-entropy reconstruction failed ({exc}); using a Gaussian"
        logger.warning(message)
        warnings.append(message)
        return gaussian_interval_prob(gaussian, interval.corrected_lower,
                                      interval.corrected_upper), {'reconstruction': 'gaussian'}
    probability = density.interval_prob(interval.corrected_lower, interval.corrected_upper)
    return probability, {'reconstruction': 'maxent', 'iterations': density.iterations,
                         'support': list(support)}


def uses_closure(method: str, order: Optional[int]) -> bool:
    """
    Whether an estimate takes its moments from the closed moment equations.

    ``maxent(2)`` feeds the CLA mean and variance to the max-entropy
    reconstruction; ``moments(m)`` and ``maxent(m)`` for m > 2 use the first
    m raw moments of the closure solved at order m + closure offset.
    """
    return method == 'moments' or (method == 'maxent' and (order or 2) > 2)


def _estimate(method: str, order: Optional[int], N: int, interval: ThresholdInterval,
              gaussian: Optional[GaussianEstimate], moments: Optional[Sequence[float]],
              time: float, context: str) -> GlobalEstimate:
    warnings: List[str] = []
    if interval.empty:
        warnings.append(f"{context}: corrected threshold interval is empty")
        mean = gaussian.mean if gaussian else float(moments[0])
        variance = gaussian.variance if gaussian else 0.0
        return GlobalEstimate(0.0, method, interval, mean, variance, time, warnings)
    if method == 'cla':
        probability = gaussian_interval_prob(gaussian, interval.corrected_lower,
                                             interval.corrected_upper)
        return GlobalEstimate(probability, method, interval, gaussian.mean, gaussian.variance,
                              time, warnings)
    if moments is None:
        moments = gaussian.raw_moments(order)
    probability, diagnostics = _moment_estimate(moments, N, interval, warnings, context)
    mean = float(moments[0])
    variance = float(moments[1] - moments[0] ** 2) if len(moments) > 1 else 0.0
    return GlobalEstimate(probability, f"{method}({order})", interval, mean, variance, time,
                          warnings, diagnostics)


def _final_index(pm: ProductPopulationModel) -> int:
    return pm.regions[0].variable_index[FINAL_COUNTER]


def _fluid_diagnostic(pm: ProductPopulationModel, phi: np.ndarray,
                      interval: ThresholdInterval) -> Dict[str, object]:
    """Large-population shortcut value; reported only."""
    fraction = float(phi[pm.final_indices()].sum())
    lo, hi = interval.lower / pm.N, interval.upper / pm.N
    return {'fluid_final_fraction': fraction, 'fluid_strictly_inside': bool(lo < fraction < hi)}


def resolve_args(model: PopulationModel, d: OneGDTA, args: Sequence[CslTaFormula], T: float,
                 method: str) -> Tuple[OneGDTA, List[str]]:
    if not d.props:
        return d, []
    local_method = method if parse_method(method)[0] in ('fluid', 'moments') else 'fluid'
    signals = {prop: check_csl_ta(arg, model, T, local_method) for prop, arg in zip(d.props, args)}
    warnings = sorted({w for per_state in signals.values() for s in per_state.values()
                       for w in s.warnings})
    return structural_resolution(d, signals, horizon=T), warnings


class PathGlobalChecker:
    """
    Estimates for ``frac(D, T) in [a, b]`` from one solve of the product model.

    Because the sliced property for a shorter horizon is a prefix of the one
    for ``T_max``, a single solve up to ``T_max`` serves every T <= T_max.
    """

    def __init__(self, model: PopulationModel, d: OneGDTA, T_max, method: str = 'cla',
                 cfg: Optional[dict] = None):
        self.model = model
        self.method, self.order = parse_method(method)
        if self.method not in ('cla', 'moments', 'maxent'):
            raise UsageError(f"method '{method}' is not an approximation method")
        if self.method != 'cla' and self.order is None:
            self.order = 2 if self.method == 'maxent' else CURVE_CONFIG['moment_order']
        self.closure = uses_closure(self.method, self.order)
        self.T_max = float(T_max)
        self.product = synchronize(model, d, T_max)
        times = [float(t) for t in self.product.times]
        self.spec: Optional[MomentSpec] = None
        if self.closure:
            closure_order = self.order + COLLECTIVE_CONFIG['closure_offset']
            self.spec, self.solution = chained_moment_solve(self.product.regions, times,
                                                            closure_order, cfg)
        else:
            self.solution = chained_solve(self.product.regions, times, 'cla', cfg)

    def estimate(self, interval: Tuple[Fraction, Fraction], T=None,
                 correct: Optional[bool] = None) -> GlobalEstimate:
        T = self.T_max if T is None else float(T)
        if not 0 < T <= self.T_max + 1e-12:
            raise UsageError(f"horizon {T} outside (0, {self.T_max}]")
        correct = COLLECTIVE_CONFIG['finite_size_correction'] if correct is None else correct
        N = self.model.N
        bounds = finite_size_correct(interval, N, correct)
        context = f"{self.product.product.sliced.name}@T={T:g}"
        final = _final_index(self.product)
        if self.closure:
            moments = raw_moments(self.solution, self.spec, FINAL_COUNTER, T)[: self.order]
            result = _estimate(self.method, self.order, N, bounds, None, moments, T, context)
        else:
            mean, cov = cla_moments(self.solution, N, T)
            gaussian = GaussianEstimate(float(mean[final]), float(cov[final, final]), T)
            result = _estimate(self.method, self.order, N, bounds, gaussian, None, T, context)
            d = len(self.product.regions[0].variables)
            result.diagnostics.update(_fluid_diagnostic(self.product, self.solution(T)[:d], bounds))
        return result


def check_path_global(model: PopulationModel, d: OneGDTA, interval: Tuple[Fraction, Fraction],
                      T, method: str = 'cla', correct: Optional[bool] = None,
                      cfg: Optional[dict] = None) -> GlobalEstimate:
    """
    Probability that the number of agents accepted by ``d`` within ``T`` lies in ``interval``.

    Args:
        model: Base population model
        d: Automaton without free propositions
        interval: Count bounds [a N, b N]
        T: Time horizon
        method: 'cla', 'moments(m)' or 'maxent(m)'
        correct: Apply the finite-size correction (default from COLLECTIVE_CONFIG)
        cfg: Solver overrides

    Returns:
        GlobalEstimate
    """
    return PathGlobalChecker(model, d, T, method, cfg).estimate(interval, T, correct)


def _aggregate_raw_moments(y: np.ndarray, spec: MomentSpec, members: Sequence[int],
                           order: int) -> List[float]:
    """E[(sum_{i in members} X_i)^k], k = 1..order, by multinomial expansion."""
    result = []
    for k in range(1, order + 1):
        total = 0.0
        for combo in combinations_with_replacement(members, k):
            alpha = [0] * len(spec.variables)
            for i in combo:
                alpha[i] += 1
            coefficient = math.factorial(k) // math.prod(math.factorial(a) for a in alpha)
            total += coefficient * y[spec.index(tuple(alpha))]
        result.append(total)
    return result


def satisfying_states(model: PopulationModel, formula: CslTaFormula, t0: float,
                      method: str = 'fluid') -> Tuple[List[str], List[str]]:
    """S(formula, t0) and the warnings raised while computing it."""
    local_method = method if parse_method(method)[0] in ('fluid', 'moments') else 'fluid'
    signals = check_csl_ta(formula, model, t0, local_method)
    states = [s for s in model.states if signals[s].value(t0)]
    warnings = sorted({w for s in signals.values() for w in s.warnings})
    return states, warnings


def check_state_global(model: PopulationModel, formula: CslTaFormula,
                       interval: Tuple[Fraction, Fraction], t0, method: str = 'cla',
                       correct: Optional[bool] = None, cfg: Optional[dict] = None) -> GlobalEstimate:
    """
    Probability that the number of agents satisfying ``formula`` at ``t0`` lies in ``interval``.
    """
    t0 = float(t0)
    name, order = parse_method(method)
    correct = COLLECTIVE_CONFIG['finite_size_correction'] if correct is None else correct
    N = model.N
    members, warnings = satisfying_states(model, formula, t0, method)
    indices = [model.variable_index[s] for s in members]
    bounds = finite_size_correct(interval, N, correct)
    context = f"{formula}@t0={t0:g}"

    cap = COLLECTIVE_CONFIG['max_state_moment_order']
    if name in ('moments', 'maxent') and (order or 0) > cap:
        message = f"{context}: moment order {order} above {cap}; using a Gaussian"
        logger.warning(message)
        warnings.append(message)
        name, order = 'cla', None
    if name != 'cla' and order is None:
        order = 2 if name == 'maxent' else CURVE_CONFIG['moment_order']

    if uses_closure(name, order):
        spec = MomentSpec.for_model(model, order + COLLECTIVE_CONFIG['closure_offset'])
        y = spec.initial_values(model.initial_vector) if t0 == 0 else \
            moment_solve(model, spec, t0, cfg=cfg).y_end
        moments = _aggregate_raw_moments(y, spec, indices, order) if indices else [0.0] * order
        result = _estimate(name, order, N, bounds, None, moments, t0, context)
    elif name in ('cla', 'maxent'):
        if t0 == 0:
            mean, cov = model.initial_vector, np.zeros((len(model.variables),) * 2)
        else:
            mean, cov = cla_moments(cla_solve(model, t0, cfg=cfg), N, t0)
        aggregated_mean = float(mean[indices].sum()) if indices else 0.0
        aggregated_var = float(cov[np.ix_(indices, indices)].sum()) if indices else 0.0
        gaussian = GaussianEstimate(aggregated_mean, max(aggregated_var, 0.0), t0)
        result = _estimate(name, order, N, bounds, gaussian, None, t0, context)
    else:
        raise UsageError(f"method '{method}' is not an approximation method")
    result.warnings = warnings + result.warnings
    result.diagnostics['satisfying_states'] = members
    return result


@dataclass
class VerdictNode:
    """Node of the verdict tree of a global property."""
    type: str
    verdict: bool
    path: str
    estimate: Optional[float] = None
    children: List['VerdictNode'] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    details: Dict[str, object] = field(default_factory=dict)

    def all_warnings(self) -> List[str]:
        result = list(self.warnings)
        for child in self.children:
            result.extend(child.all_warnings())
        return result

    def to_dict(self) -> Dict[str, object]:
        return {
            'type': self.type,
            'verdict': self.verdict,
            'path': self.path,
            'estimate': self.estimate,
            'warnings': list(self.warnings),
            'details': dict(self.details),
            'children': [c.to_dict() for c in self.children],
        }


class GlobalFormulaChecker:
    """Evaluates a boolean combination of collective atoms."""

    def __init__(self, model: PopulationModel, method: str = 'cla',
                 correct: Optional[bool] = None, estimator=None, cfg: Optional[dict] = None):
        self.model = model
        self.method = method
        self.correct = correct
        self.cfg = cfg
        self.estimator = estimator or self.estimate_atom
        self.stats = {'atoms': 0}

    def estimate_atom(self, atom: GlobalProperty) -> GlobalEstimate:
        bounds = atom.count_bounds(self.model.N)
        if atom.op == 'path':
            d, warnings = resolve_args(self.model, atom.dta, atom.args, float(atom.horizon),
                                        self.method)
            result = check_path_global(self.model, d, bounds, atom.horizon, self.method,
                                       self.correct, self.cfg)
            result.warnings = warnings + result.warnings
            return result
        return check_state_global(self.model, atom.formula, bounds, atom.time, self.method,
                                  self.correct, self.cfg)

    def check(self, prop: GlobalProperty, path: str = 'root') -> VerdictNode:
        if prop.op in ('true', 'false'):
            return VerdictNode(prop.op, prop.op == 'true', path)
        if prop.op == 'not':
            child = self.check(prop.children[0], f"{path}.not")
            return VerdictNode('not', not child.verdict, path, children=[child])
        if prop.op in ('and', 'or'):
            children = [self.check(c, f"{path}.{prop.op}[{i}]") for i, c in enumerate(prop.children)]
            combine = all if prop.op == 'and' else any
            return VerdictNode(prop.op, combine(c.verdict for c in children), path,
                               children=children)
        self.stats['atoms'] += 1
        try:
            result = self.estimator(prop)
        except PopulationCheckerError as exc:
            raise GlobalCheckError(f"{path} ({prop})", exc) from exc
        except (ValueError, ArithmeticError) as exc:
            raise GlobalCheckError(f"{path} ({prop})", exc) from exc
        verdict = satisfies_bound(result.probability, prop.comparator, prop.bound)
        logger.info(
            f"{path}: P={result.probability:.6f} {prop.comparator} {prop.bound} -> {verdict}"
        )
        return VerdictNode(prop.op, verdict, path, estimate=result.probability,
                           warnings=list(result.warnings), details=result.to_dict())


def check_global_formula(prop: GlobalProperty, model: PopulationModel, method: str = 'cla',
                         correct: Optional[bool] = None, estimator=None,
                         cfg: Optional[dict] = None) -> VerdictNode:
    """
    Verdict tree of a global property.

    Args:
        prop: Global property
        model: Base population model
        method: Estimation method of the atoms
        correct: Finite-size correction flag
        estimator: Replacement atom estimator (GlobalProperty -> GlobalEstimate)
        cfg: Solver overrides

    Returns:
        Root VerdictNode
    """
    return GlobalFormulaChecker(model, method, correct, estimator, cfg).check(prop)
