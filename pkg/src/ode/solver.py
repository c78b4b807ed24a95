"""
Explicit Dormand-Prince 5(4) integrator with PI step control and dense output
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from config.settings import SOLVER_CONFIG
from src.errors import StiffnessError

logger = logging.getLogger(__name__)

# Butcher tableau
C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
B = A[6]

# Difference between the 5th and embedded 4th order weights (FSAL stage included)
E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])

# Dense output: y(t + theta h) = y + h * K^T P [theta, theta^2, theta^3, theta^4]
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

ERROR_EXPONENT = 1 / 5


@dataclass
class OdeSystem:
    """
    Right-hand side of y' = f(t, y).

    Attributes:
        dimension: Length of the state vector
        rhs: Derivative evaluator f(t, y)
        labels: Component names (used as CSV headers)
        post_step: Optional projection applied to every accepted state
    """
    dimension: int
    rhs: Callable[[float, np.ndarray], np.ndarray]
    labels: Sequence[str] = ()
    post_step: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if not self.labels:
            self.labels = tuple(f"y{i}" for i in range(self.dimension))
        if len(self.labels) != self.dimension:
            raise ValueError(f"{len(self.labels)} labels for dimension {self.dimension}")


@dataclass
class OdeSolution:
    """
    Piecewise quartic dense output of an integration.

    ``ts[i]``/``ys[i]`` are accepted breakpoints and ``ks[i]`` the stage
    derivatives of the step ``[ts[i], ts[i+1]]``.
    """
    ts: np.ndarray
    ys: np.ndarray
    ks: np.ndarray
    labels: Sequence[str]
    stats: Dict[str, int] = field(default_factory=dict)

    @property
    def t_start(self) -> float:
        return float(self.ts[0])

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    @property
    def y_end(self) -> np.ndarray:
        return self.ys[-1].copy()

    def __call__(self, t: Union[float, Sequence[float]]) -> np.ndarray:
        scalar = np.ndim(t) == 0
        times = np.atleast_1d(np.asarray(t, dtype=float))
        slack = 1e-12 * max(1.0, abs(self.t_end))
        if times.min() < self.t_start - slack or times.max() > self.t_end + slack:
            raise ValueError(
                f"evaluation outside [{self.t_start}, {self.t_end}]: "
                f"[{times.min()}, {times.max()}]"
            )
        times = np.clip(times, self.t_start, self.t_end)
        if len(self.ts) == 1:
            out = np.repeat(self.ys[:1], len(times), axis=0)
            return out[0] if scalar else out
        idx = np.clip(np.searchsorted(self.ts, times, side='right') - 1, 0, len(self.ts) - 2)
        h = self.ts[idx + 1] - self.ts[idx]
        theta = (times - self.ts[idx]) / h
        powers = np.stack([theta, theta ** 2, theta ** 3, theta ** 4], axis=1)
        # (n, 7, d) x (7, 4) x (n, 4) -> (n, d)
        q = np.einsum('nsd,sp,np->nd', self.ks[idx], P, powers)
        out = self.ys[idx] + h[:, None] * q
        exact = times == self.ts[np.minimum(idx + 1, len(self.ts) - 1)]
        out[exact] = self.ys[idx[exact] + 1]
        return out[0] if scalar else out

    def component(self, label: str, t) -> np.ndarray:
        return self(t)[..., list(self.labels).index(label)]

    def concatenate(self, other: 'OdeSolution') -> 'OdeSolution':
        """Join with a solution starting where this one ends."""
        if not np.isclose(other.t_start, self.t_end, rtol=0, atol=1e-12 * max(1.0, abs(self.t_end))):
            raise ValueError(f"solutions do not touch: {self.t_end} vs {other.t_start}")
        if list(other.labels) != list(self.labels):
            raise ValueError("cannot concatenate solutions with different components")
        stats = {k: self.stats.get(k, 0) + other.stats.get(k, 0)
                 for k in set(self.stats) | set(other.stats)}
        if len(other.ts) == 1:
            return self
        if len(self.ts) == 1:
            return other
        return OdeSolution(
            ts=np.concatenate([self.ts, other.ts[1:]]),
            ys=np.concatenate([self.ys, other.ys[1:]]),
            ks=np.concatenate([self.ks, other.ks]),
            labels=self.labels,
            stats=stats,
        )

    def to_frame(self, grid: Optional[Sequence[float]] = None, points: int = 1000) -> pd.DataFrame:
        if grid is None:
            grid = np.linspace(self.t_start, self.t_end, points)
        values = self(np.asarray(grid, dtype=float))
        df = pd.DataFrame(values, columns=list(self.labels))
        df.insert(0, 't', np.asarray(grid, dtype=float))
        return df

    def to_csv(self, path, grid: Optional[Sequence[float]] = None, points: int = 1000) -> None:
        self.to_frame(grid, points).to_csv(path, index=False)
        logger.info(f"Saved trajectory ({len(self.labels)} components) to {path}")


def _rms_norm(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x * x))) if x.size else 0.0


def _initial_step(sys: OdeSystem, t0: float, y0: np.ndarray, f0: np.ndarray, direction: float,
                  rtol: float, atol: float) -> float:
    """Starting step from the size of y and of its first two derivatives."""
    scale = atol + np.abs(y0) * rtol
    d0 = _rms_norm(y0 / scale)
    d1 = _rms_norm(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = sys.rhs(t0 + h0 * direction, y1)
    d2 = _rms_norm((f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** ERROR_EXPONENT
    return min(100 * h0, h1)


def integrate(sys: OdeSystem, t0: float, t1: float, y0: Sequence[float],
              cfg: Optional[Dict] = None, first_step: Optional[float] = None) -> OdeSolution:
    """
    Integrate ``sys`` from ``t0`` to ``t1``.

    Args:
        sys: System to integrate
        t0: Start time
        t1: End time, t1 > t0
        y0: Initial state
        cfg: Overrides of SOLVER_CONFIG (rtol, atol, ...)
        first_step: Initial step size; estimated when omitted

    Returns:
        OdeSolution with dense output over [t0, t1]

    Raises:
        StiffnessError: the step size underflowed
    """
    cfg = {**SOLVER_CONFIG, **(cfg or {})}
    rtol, atol = cfg['rtol'], cfg['atol']
    t0, t1 = float(t0), float(t1)
    if not t1 > t0:
        raise ValueError(f"integration interval must have t1 > t0, got [{t0}, {t1}]")
    y = np.array(y0, dtype=float)
    if y.shape != (sys.dimension,):
        raise ValueError(f"initial state has shape {y.shape}, expected ({sys.dimension},)")
    if not np.all(np.isfinite(y)):
        raise ValueError("initial state is not finite")

    t = t0
    f = np.asarray(sys.rhs(t, y), dtype=float)
    stats = {'steps': 0, 'rejected': 0, 'rhs_evals': 2}
    h = first_step or _initial_step(sys, t, y, f, 1.0, rtol, atol)
    h = min(h, t1 - t0)
    previous_error = 1.0

    ts: List[float] = [t]
    ys: List[np.ndarray] = [y.copy()]
    ks: List[np.ndarray] = []
    K = np.empty((7, sys.dimension))

    while t < t1:
        if stats['steps'] + stats['rejected'] >= cfg['max_steps']:
            raise StiffnessError(t, h)
        min_step = 16 * np.spacing(max(abs(t), 1.0))
        if h < min_step:
            raise StiffnessError(t, h)
        if t + h > t1 or t1 - (t + h) < min_step:
            h = t1 - t

        K[0] = f
        for s in range(1, 7):
            K[s] = sys.rhs(t + C[s] * h, y + h * (A[s] @ K[:s]))
        stats['rhs_evals'] += 6
        y_new = y + h * (B @ K[:6])

        scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
        error = _rms_norm(h * (E @ K) / scale)
        if not np.isfinite(error) or not np.all(np.isfinite(y_new)):
            error = np.inf

        if error <= 1.0:
            t_new = t1 if h == t1 - t else t + h
            if sys.post_step is not None:
                y_new = sys.post_step(y_new)
                f = np.asarray(sys.rhs(t_new, y_new), dtype=float)
                stats['rhs_evals'] += 1
            else:
                f = K[6].copy()
            ks.append(K.copy())
            ts.append(t_new)
            ys.append(y_new.copy())
            t, y = t_new, y_new
            stats['steps'] += 1
            if error == 0.0:
                factor = cfg['max_factor']
            else:
                factor = cfg['safety'] * error ** -cfg['pi_alpha'] * previous_error ** cfg['pi_beta']
            h *= min(cfg['max_factor'], max(cfg['min_factor'], factor))
            previous_error = max(error, 1e-4)
        else:
            stats['rejected'] += 1
            factor = cfg['min_factor'] if not np.isfinite(error) else \
                max(cfg['min_factor'], cfg['safety'] * error ** -ERROR_EXPONENT)
            logger.debug(f"Rejected step h={h:.3e} at t={t:.6g} (error {error:.3e})")
            h *= factor

    logger.debug(
        f"Integrated [{t0:.6g}, {t1:.6g}]: {stats['steps']} steps, "
        f"{stats['rejected']} rejected, {stats['rhs_evals']} RHS evaluations"
    )
    return OdeSolution(
        ts=np.array(ts),
        ys=np.array(ys),
        ks=np.array(ks).reshape(len(ks), 7, sys.dimension),
        labels=tuple(sys.labels),
        stats=stats,
    )


def constant_solution(labels: Sequence[str], t0: float, y0: Sequence[float]) -> OdeSolution:
    """Zero-length solution holding ``y0`` at ``t0``."""
    y0 = np.asarray(y0, dtype=float)
    return OdeSolution(ts=np.array([float(t0)]), ys=y0[None, :].copy(),
                       ks=np.zeros((0, 7, len(y0))), labels=tuple(labels),
                       stats={'steps': 0, 'rejected': 0, 'rhs_evals': 0})
