"""
Individual-agent path probabilities and CSL-TA model checking
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import CURVE_CONFIG
from src.errors import NumericalFailureError, StiffnessError, UsageError
from src.model.population import PopulationModel
from src.ode.solver import OdeSolution, OdeSystem, integrate
from src.properties.clocks import compare
from src.properties.dta import OneGDTA
from src.properties.logic import CslTaFormula
from src.properties.signals import BooleanSignal, signal_combine, structural_resolution
from src.synchronize.product import ProductAgentClass, product_agent
from src.synchronize.slicing import prepare_property
from src.checking.schedule import PopulationTrajectory, RateSchedule, parse_method, rate_schedule

logger = logging.getLogger(__name__)

MAX_SPLIT_DEPTH = 12


@dataclass
class TransitionProbMatrix:
    """P(t | t0) over the product states."""
    matrix: np.ndarray
    t0: float
    t: float
    warnings: List[str] = field(default_factory=list)

    def accept_probability(self, row: int, final_mask: np.ndarray) -> float:
        return float(np.clip(self.matrix[row, final_mask].sum(), 0.0, 1.0))


def local_product(model: PopulationModel, d: OneGDTA, T) -> ProductAgentClass:
    """Relabel, prune and slice ``d`` against the agent class of ``model``."""
    agent, sliced = prepare_property(model.agent_class, d, T)
    return product_agent(agent, sliced)


def _clamp(matrix: np.ndarray, warnings: List[str], context: str) -> np.ndarray:
    excess = max(float(-matrix.min(initial=0.0)), float(matrix.max(initial=0.0) - 1.0), 0.0)
    if excess > CURVE_CONFIG['clamp_warning']:
        message = f"{context}: probabilities clamped by {excess:.2e}"
        logger.warning(message)
        warnings.append(message)
    return np.clip(matrix, 0.0, 1.0)


def _check_rows(matrix: np.ndarray, warnings: List[str], context: str) -> None:
    deviation = float(np.abs(matrix.sum(axis=1) - 1.0).max(initial=0.0))
    if deviation > CURVE_CONFIG['row_sum_tolerance']:
        message = f"{context}: row sums deviate from 1 by {deviation:.2e}"
        logger.warning(message)
        warnings.append(message)


def _forward_system(schedule: RateSchedule, j: int) -> OdeSystem:
    n = schedule.size
    return OdeSystem(
        dimension=n * n,
        rhs=lambda t, y: (y.reshape(n, n) @ schedule.generator(j, t)).reshape(-1),
        labels=tuple(f"P_{a}_{b}" for a in range(n) for b in range(n)),
    )


def _forward_segment(schedule: RateSchedule, j: int, t0: float, t1: float,
                     cfg: Optional[dict] = None, depth: int = 0) -> np.ndarray:
    """P_j(t1 | t0) from the identity; stiff stretches are split and recomposed."""
    n = schedule.size
    if t1 <= t0:
        return np.eye(n)
    try:
        solution = integrate(_forward_system(schedule, j), t0, t1, np.eye(n).reshape(-1), cfg)
        return solution.y_end.reshape(n, n)
    except StiffnessError as exc:
        if depth >= MAX_SPLIT_DEPTH:
            raise NumericalFailureError(
                f"forward equation of region {j} failed on [{t0:g}, {t1:g}] at t={exc.t_fail:g}"
            ) from exc
        middle = 0.5 * (t0 + t1)
        logger.debug(f"Restarting region {j} on [{t0:g}, {t1:g}] in two halves")
        return (_forward_segment(schedule, j, t0, middle, cfg, depth + 1)
                @ _forward_segment(schedule, j, middle, t1, cfg, depth + 1))


def region_matrices(schedule: RateSchedule, t0: float, t1: float,
                    clock_start: Optional[float] = None,
                    cfg: Optional[dict] = None) -> List[np.ndarray]:
    """Per region piece of [t0, t1], the matrix P_j of that piece."""
    clock_start = t0 if clock_start is None else clock_start
    times = [float(c) for c in schedule.product.times]
    matrices = []
    for j, (lo, hi) in enumerate(zip(times, times[1:])):
        a = max(t0, clock_start + lo)
        b = min(t1, clock_start + hi)
        if j == len(times) - 2:
            b = t1
        if b > a:
            matrices.append(_forward_segment(schedule, j, a, b, cfg))
    return matrices


def forward_prob(schedule: RateSchedule, t0: float, t1: float,
                 clock_start: Optional[float] = None,
                 cfg: Optional[dict] = None) -> TransitionProbMatrix:
    """
    Transition probabilities of the tagged agent between ``t0`` and ``t1``.

    The property clock starts at ``clock_start`` (default ``t0``); region ``j``
    of the property covers [clock_start + t_j, clock_start + t_{j+1}].

    Args:
        schedule: Time-dependent generators
        t0: Start time
        t1: End time
        clock_start: Absolute time at which the property clock reads 0
        cfg: Solver overrides

    Returns:
        TransitionProbMatrix, the ordered product of the region matrices
    """
    if t1 > schedule.horizon + 1e-9:
        raise ValueError(f"t1={t1} beyond the schedule horizon {schedule.horizon}")
    warnings: List[str] = []
    n = schedule.size
    result = np.eye(n)
    for piece in region_matrices(schedule, t0, t1, clock_start, cfg):
        result = _clamp(result @ piece, warnings, f"P({t1:g}|{t0:g})")
    _check_rows(result, warnings, f"P({t1:g}|{t0:g})")
    return TransitionProbMatrix(matrix=result, t0=t0, t=t1, warnings=warnings)


def _initial_rows(p: ProductAgentClass) -> Dict[str, int]:
    return {s: p.initial_index(s) for s in p.agent.states}


def path_prob_fixed(s0: str, t0: float, d: OneGDTA, model: PopulationModel, T,
                    method: str = 'fluid', schedule: Optional[RateSchedule] = None,
                    population: Optional[PopulationTrajectory] = None,
                    cfg: Optional[dict] = None) -> float:
    """
    Probability that an agent in ``s0`` at time ``t0`` is accepted by ``d`` within ``T``.

    Args:
        s0: Agent state at ``t0``
        t0: Initial time
        d: Automaton without free propositions
        model: Base population model
        T: Time horizon of the property
        method: 'fluid' or 'moments(m)'
        schedule: Precomputed schedule for the product of ``d`` (horizon >= t0 + T)
        population: Reuse a population trajectory covering t0 + T
        cfg: Solver overrides

    Returns:
        Probability in [0, 1]
    """
    if s0 not in model.states:
        raise UsageError(f"unknown agent state '{s0}'")
    if schedule is None:
        p = local_product(model, d, T)
        schedule = rate_schedule(p, model, method, float(t0) + float(T), population=population,
                                 cfg=cfg)
    p = schedule.product
    P = forward_prob(schedule, float(t0), float(t0) + float(T), cfg=cfg)
    return P.accept_probability(p.initial_index(s0), p.final_mask())


@dataclass
class PathProbabilityCurve:
    """
    t0 -> P(s0, t0 |= D) sampled on a uniform grid.

    ``evaluator`` gives the value off-grid (used to refine threshold crossings);
    without it values are interpolated linearly.
    """
    state: str
    grid: np.ndarray
    values: np.ndarray
    evaluator: Optional[Callable[[float], float]] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def t0_max(self) -> float:
        return float(self.grid[-1])

    def __call__(self, t0: float) -> float:
        if self.evaluator is not None:
            return float(np.clip(self.evaluator(float(t0)), 0.0, 1.0))
        return float(np.interp(t0, self.grid, self.values))

    @classmethod
    def from_function(cls, fn: Callable[[float], float], t0_max: float,
                      points: Optional[int] = None, state: str = '') -> 'PathProbabilityCurve':
        points = points or CURVE_CONFIG['grid_points']
        grid = np.linspace(0.0, t0_max, points) if t0_max > 0 else np.array([0.0])
        values = np.clip([fn(float(t)) for t in grid], 0.0, 1.0)
        return cls(state=state, grid=grid, values=np.asarray(values), evaluator=fn)


def _stacked_system(schedule: RateSchedule, offsets: Sequence[Tuple[float, float]]) -> OdeSystem:
    """
    dP_j/dt0 = P_j Q_j(t0 + c_{j+1}) - Q_j(t0 + c_j) P_j for all regions at once.
    """
    n = schedule.size
    k = len(offsets)

    def rhs(t0: float, y: np.ndarray) -> np.ndarray:
        blocks = y.reshape(k, n, n)
        out = np.empty_like(blocks)
        for j, (lo, hi) in enumerate(offsets):
            out[j] = blocks[j] @ schedule.generator(j, t0 + hi) - schedule.generator(j, t0 + lo) @ blocks[j]
        return out.reshape(-1)

    return OdeSystem(dimension=k * n * n, rhs=rhs,
                     labels=tuple(f"P{j}_{a}_{b}" for j in range(k)
                                  for a in range(n) for b in range(n)))


class _KolmogorovCurves:
    """Forward-backward integration of all region matrices in t0, windowed."""

    def __init__(self, schedule: RateSchedule, T: float, cfg: Optional[dict] = None):
        self.schedule = schedule
        self.T = float(T)
        self.cfg = cfg
        times = [float(c) for c in schedule.product.times]
        self.offsets = list(zip(times, times[1:]))
        self.windows: List[Tuple[float, float, OdeSolution]] = []
        self.n = schedule.size

    def _initial(self, t0: float) -> np.ndarray:
        blocks = [_forward_segment(self.schedule, j, t0 + lo, t0 + hi, self.cfg)
                  for j, (lo, hi) in enumerate(self.offsets)]
        return np.concatenate([b.reshape(-1) for b in blocks])

    def solve(self, t0_max: float) -> None:
        window = CURVE_CONFIG['window_fraction'] * self.T
        floor = CURVE_CONFIG['window_floor_fraction'] * self.T
        system = _stacked_system(self.schedule, self.offsets)
        start = 0.0
        while start < t0_max:
            length = min(window, t0_max - start)
            while True:
                try:
                    solution = integrate(system, start, start + length, self._initial(start), self.cfg)
                    break
                except StiffnessError as exc:
                    if length / 2 < floor:
                        raise NumericalFailureError(
                            f"path probability curve failed near t0={exc.t_fail:g} "
                            f"with window {length:g}"
                        ) from exc
                    length /= 2
                    logger.debug(f"Halving curve window to {length:g} at t0={start:g}")
            self.windows.append((start, start + length, solution))
            start += length

    def product(self, t0: float) -> np.ndarray:
        if t0 <= 0.0 or not self.windows:
            blocks = self._initial(t0).reshape(len(self.offsets), self.n, self.n)
        else:
            for lo, hi, solution in self.windows:
                if t0 <= hi:
                    break
            blocks = solution(t0).reshape(len(self.offsets), self.n, self.n)
        result = np.eye(self.n)
        for block in blocks:
            result = np.clip(result @ block, 0.0, 1.0)
        return result


def path_prob_curves(d: OneGDTA, model: PopulationModel, T, t0_max: float,
                     method: str = 'fluid', algorithm: str = 'kolmogorov',
                     grid_points: Optional[int] = None,
                     population: Optional[PopulationTrajectory] = None,
                     cfg: Optional[dict] = None) -> Dict[str, PathProbabilityCurve]:
    """
    Path probability as a function of the initial time, for every agent state.

    Args:
        d: Automaton without free propositions
        model: Base population model
        T: Time horizon of the property
        t0_max: Last initial time
        method: 'fluid' or 'moments(m)'
        algorithm: 'kolmogorov' (integrate the region matrices in t0) or
            'products' (one forward solve per grid point)
        grid_points: Uniform grid size (default 1000)
        population: Reuse a population trajectory covering t0_max + T
        cfg: Solver overrides

    Returns:
        Mapping agent state -> PathProbabilityCurve
    """
    T = float(T)
    t0_max = float(t0_max)
    points = grid_points or CURVE_CONFIG['grid_points']
    grid = np.linspace(0.0, t0_max, points) if t0_max > 0 else np.array([0.0])
    p = local_product(model, d, T)
    schedule = rate_schedule(p, model, method, t0_max + T, population=population, cfg=cfg)
    final = p.final_mask()
    rows = _initial_rows(p)
    warnings: List[str] = []

    if algorithm == 'kolmogorov':
        engine = _KolmogorovCurves(schedule, T, cfg)
        if t0_max > 0:
            engine.solve(t0_max)
        product_at = engine.product
    elif algorithm == 'products':
        def product_at(t0: float) -> np.ndarray:
            return forward_prob(schedule, t0, t0 + T, cfg=cfg).matrix
    else:
        raise UsageError(f"unknown curve algorithm '{algorithm}'")

    samples = np.empty((len(grid), len(rows)))
    for i, t0 in enumerate(grid):
        if t0 == 0.0:
            matrix = forward_prob(schedule, 0.0, T, cfg=cfg)
            warnings.extend(matrix.warnings)
            matrix = matrix.matrix
        else:
            matrix = product_at(float(t0))
        for k, s in enumerate(rows):
            samples[i, k] = matrix[rows[s], final].sum()
    pre_clamp = max(float(-samples.min()), float(samples.max() - 1.0), 0.0)
    if pre_clamp > CURVE_CONFIG['clamp_warning']:
        message = f"{d.name}: curve values clamped by {pre_clamp:.2e}"
        logger.warning(message)
        warnings.append(message)
    samples = np.clip(samples, 0.0, 1.0)

    curves = {}
    for k, s in enumerate(rows):
        row, index = rows[s], k

        def evaluate(t0: float, row=row) -> float:
            return float(product_at(t0)[row, final].sum()) if t0 > 0 else float(samples[0, index])

        curves[s] = PathProbabilityCurve(state=s, grid=grid, values=samples[:, k],
                                         evaluator=evaluate, warnings=list(warnings))
    logger.info(
        f"Path probability curves of {d.name} (T={T:g}) over [0, {t0_max:g}] "
        f"by {method}/{algorithm} on {len(grid)} points"
    )
    return curves


def path_prob_curve(s0: str, d: OneGDTA, model: PopulationModel, T, t0_max: float,
                    method: str = 'fluid', **kwargs) -> PathProbabilityCurve:
    """Curve t0 -> P(s0, t0 |= D) for a single initial state."""
    if s0 not in model.states:
        raise UsageError(f"unknown agent state '{s0}'")
    return path_prob_curves(d, model, T, t0_max, method, **kwargs)[s0]


def _refine(predicate: Callable[[float], bool], lo: float, hi: float, tolerance: float) -> float:
    """Bisection on a predicate whose value differs at ``lo`` and ``hi``."""
    left = predicate(lo)
    while hi - lo > tolerance:
        middle = 0.5 * (lo + hi)
        if predicate(middle) == left:
            lo = middle
        else:
            hi = middle
    return 0.5 * (lo + hi)


def _touches(grid: np.ndarray, f: np.ndarray) -> List[Tuple[int, float, float]]:
    """
    Local extrema of ``f`` that come within the tangency tolerance of zero
    without a sign change between their grid neighbours.

    Returns (grid index, vertex time, |f| at the vertex); the vertex is taken
    from the parabola through the three samples around the extremum.
    """
    near = CURVE_CONFIG['tangency_tolerance']
    found: List[Tuple[int, float, float]] = []
    for i in range(1, len(grid) - 1):
        left, right = f[i] - f[i - 1], f[i + 1] - f[i]
        if left * right > 0 or (left == 0 and right == 0):
            continue
        if f[i - 1] * f[i + 1] <= 0:
            continue
        ts = grid[i - 1:i + 2]
        a, b, c = np.polyfit(ts - ts[1], f[i - 1:i + 2], 2)
        if a != 0 and ts[0] - ts[1] <= -b / (2 * a) <= ts[2] - ts[1]:
            vertex, distance = ts[1] - b / (2 * a), abs(c - b * b / (4 * a))
        else:
            vertex, distance = ts[1], abs(f[i])
        distance = min(distance, abs(f[i]))
        if distance > near:
            continue
        if found and found[-1][0] == i - 1 and abs(found[-1][1] - vertex) <= ts[2] - ts[1]:
            continue
        found.append((i, float(vertex), float(distance)))
    return found


def threshold_signal(curve: PathProbabilityCurve, comparator: str, p: float) -> BooleanSignal:
    """
    Boolean signal of ``curve(t0) comparator p`` over [0, t0_max].

    Crossings found on the grid are refined by bisection. A local extremum
    that comes within the tangency tolerance of ``p`` without a sign change
    around it is reported as a possible tangential zero and does not switch
    the signal, even when a grid sample lands exactly on ``p``.
    """
    grid = curve.grid
    values = curve.values
    t0_max = curve.t0_max
    truth = [compare(v, comparator, p) for v in values]
    warnings = list(curve.warnings)

    if len(grid) == 1:
        return BooleanSignal(truth[0], (), 0.0, t0_max, (), tuple(warnings))

    def holds(t: float) -> bool:
        return compare(curve(t), comparator, p)

    tolerance = CURVE_CONFIG['bisection_tolerance']
    for i, vertex, distance in _touches(grid, values - p):
        message = (f"possible tangential zero of P - {p:g} near t0={vertex:.6g} "
                   f"(distance {distance:.2e})")
        logger.warning(message)
        warnings.append(message)
        truth[i] = truth[i - 1]

    points, states, boundary = [0.0], [truth[0]], []
    for i in range(1, len(grid)):
        if truth[i] == truth[i - 1]:
            continue
        t_star = _refine(holds, float(grid[i - 1]), float(grid[i]), tolerance)
        if not points[-1] < t_star < t0_max:
            continue
        points.append(t_star)
        states.append(truth[i])
        boundary.append((t_star, comparator in ('<=', '>=')))

    switches, kept_boundary = [], []
    current = states[0]
    for t, value, edge in zip(points[1:], states[1:], boundary):
        if value != current:
            switches.append(t)
            kept_boundary.append(edge)
            current = value
    return BooleanSignal(states[0], tuple(switches), 0.0, t0_max, tuple(kept_boundary),
                         tuple(warnings))


class CslTaChecker:
    """
    Recursive CSL-TA evaluation over the agent states of one population model.

    Results are per-state boolean signals in the evaluation time t0.
    """

    def __init__(self, model: PopulationModel, method: str = 'fluid',
                 grid_points: Optional[int] = None, nested_grid_points: Optional[int] = None,
                 cfg: Optional[dict] = None):
        name, _ = parse_method(method)
        if name not in ('fluid', 'moments'):
            raise UsageError(f"local checking supports 'fluid' and 'moments', got '{method}'")
        self.model = model
        self.method = method
        self.grid_points = grid_points or CURVE_CONFIG['grid_points']
        self.nested_grid_points = nested_grid_points or CURVE_CONFIG['nested_grid_points']
        self.cfg = cfg
        self.population: Optional[PopulationTrajectory] = None
        self.stats = {'probability_nodes': 0, 'curves': 0, 'nested_evaluations': 0}

    def _population(self, horizon: float) -> PopulationTrajectory:
        if self.population is None or self.population.horizon < horizon:
            name, order = parse_method(self.method)
            self.population = PopulationTrajectory(self.model, name, horizon, order, self.cfg)
        return self.population

    def check(self, formula: CslTaFormula, t0_max: float) -> Dict[str, BooleanSignal]:
        formula.validate(self.model.states)
        horizon = t0_max + _total_horizon(formula)
        if horizon > 0:
            self._population(horizon)
        return self._check(formula, float(t0_max))

    def _check(self, formula: CslTaFormula, t0_max: float) -> Dict[str, BooleanSignal]:
        states = self.model.states
        if formula.op in ('true', 'false'):
            return {s: BooleanSignal.constant(formula.op == 'true', 0.0, t0_max) for s in states}
        if formula.op == 'atom':
            return {s: BooleanSignal.constant(s in formula.states, 0.0, t0_max) for s in states}
        if formula.op in ('not', 'and', 'or'):
            children = [self._check(c, t0_max) for c in formula.children]
            return {s: signal_combine(formula.op, [c[s] for c in children]) for s in states}
        if formula.op == 'prob':
            return self._probability(formula, t0_max)
        raise ValueError(f"unknown formula operator '{formula.op}'")

    def _probability(self, formula: CslTaFormula, t0_max: float) -> Dict[str, BooleanSignal]:
        self.stats['probability_nodes'] += 1
        T = float(formula.horizon)
        d = formula.dta
        children = [self._check(c, t0_max + T) for c in formula.children]
        signals = {prop: child for prop, child in zip(d.props, children)}
        population = self._population(t0_max + T)

        if all(sig.is_constant for child in children for sig in child.values()):
            resolved = structural_resolution(d, signals) if d.props else d
            curves = path_prob_curves(resolved, self.model, T, t0_max, self.method,
                                      grid_points=self.grid_points, population=population,
                                      cfg=self.cfg)
            self.stats['curves'] += 1
        else:
            curves = self._nested_curves(d, signals, T, t0_max, population)
        return {s: threshold_signal(curves[s], formula.comparator, float(formula.bound))
                for s in self.model.states}

    def _nested_curves(self, d: OneGDTA, signals, T: float, t0_max: float,
                       population: PopulationTrajectory) -> Dict[str, PathProbabilityCurve]:
        """Per-t0 resolution of time-varying sub-formulae."""
        cache: Dict[float, Dict[str, float]] = {}

        def probabilities(t0: float) -> Dict[str, float]:
            if t0 not in cache:
                shifted = {prop: {s: sig.shift(t0) for s, sig in per_state.items()}
                           for prop, per_state in signals.items()}
                resolved = structural_resolution(d, shifted, horizon=T)
                p = local_product(self.model, resolved, T)
                schedule = rate_schedule(p, self.model, self.method, t0 + T,
                                         population=population, cfg=self.cfg)
                matrix = forward_prob(schedule, t0, t0 + T, cfg=self.cfg)
                final = p.final_mask()
                cache[t0] = {s: matrix.accept_probability(p.initial_index(s), final)
                             for s in self.model.states}
                self.stats['nested_evaluations'] += 1
            return cache[t0]

        warnings = sorted({w for per_state in signals.values()
                           for sig in per_state.values() for w in sig.warnings})
        curves = {}
        for s in self.model.states:
            curve = PathProbabilityCurve.from_function(
                lambda t0, s=s: probabilities(t0)[s], t0_max, self.nested_grid_points, state=s)
            curve.warnings.extend(warnings)
            curves[s] = curve
        return curves


def _total_horizon(formula: CslTaFormula) -> float:
    """Largest cumulative horizon along any path of nested probability operators."""
    own = float(formula.horizon) if formula.op == 'prob' else 0.0
    return own + max((_total_horizon(c) for c in formula.children), default=0.0)


def check_csl_ta(formula: CslTaFormula, model: PopulationModel, t0_max: float,
                 method: str = 'fluid', **kwargs) -> Dict[str, BooleanSignal]:
    """
    Satisfaction signals of a CSL-TA formula for every agent state.

    Args:
        formula: CSL-TA formula over the model's agent states
        model: Base population model
        t0_max: Last evaluation time
        method: 'fluid' or 'moments(m)'

    Returns:
        Mapping agent state -> BooleanSignal on [0, t0_max]
    """
    checker = CslTaChecker(model, method, **kwargs)
    result = checker.check(formula, t0_max)
    logger.info(f"Checked {formula} on [0, {t0_max:g}]: {checker.stats}")
    return result
