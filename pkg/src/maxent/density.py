"""
Maximum entropy reconstruction of a density on a bounded support from its
first non-centred moments
"""
import logging
from dataclasses import dataclass, field
from math import comb
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from config.settings import MAXENT_CONFIG
from src.errors import MaxEntConvergenceError, MomentFeasibilityError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MomentConstraints:
    """
    E[x^k] = moments[k-1] for k = 1..m on the support [L, U].
    """
    moments: Tuple[float, ...]
    support: Tuple[float, float]

    def __post_init__(self):
        if len(self.moments) < 1:
            raise ValueError("at least one moment is required")
        lo, hi = self.support
        if not lo < hi:
            raise ValueError(f"empty support [{lo}, {hi}]")
        if not lo <= self.moments[0] <= hi:
            raise MomentFeasibilityError(f"mean {self.moments[0]} outside the support [{lo}, {hi}]")
        if self.order >= 2 and self.variance < -1e-9 * max(1.0, self.moments[0] ** 2):
            raise MomentFeasibilityError(
                f"negative variance {self.variance:.3e} (mu2={self.moments[1]}, mu1={self.moments[0]})"
            )

    @property
    def order(self) -> int:
        return len(self.moments)

    @property
    def mean(self) -> float:
        return float(self.moments[0])

    @property
    def variance(self) -> float:
        return float(self.moments[1] - self.moments[0] ** 2) if self.order >= 2 else float('nan')

    def standardization(self) -> Tuple[float, float]:
        """Shift and scale mapping x to y = (x - shift) / scale."""
        lo, hi = self.support
        if self.order >= 2 and self.variance > 0:
            return self.mean, float(np.sqrt(self.variance))
        return self.mean, (hi - lo) / 2

    def standardized(self) -> np.ndarray:
        """E[y^k], k = 1..m, for the standardized variable."""
        shift, scale = self.standardization()
        raw = [1.0, *self.moments]
        result = []
        for k in range(1, self.order + 1):
            value = sum(comb(k, j) * raw[j] * (-shift) ** (k - j) for j in range(k + 1))
            result.append(value / scale ** k)
        return np.array(result)


def default_support(mean: float, variance: float, N: int,
                    sigmas: Optional[float] = None) -> Tuple[float, float]:
    """[mean - k sigma, mean + k sigma] intersected with the count range [-1/2, N + 1/2]."""
    sigmas = sigmas or MAXENT_CONFIG['support_sigmas']
    sigma = float(np.sqrt(max(variance, 0.0)))
    if sigma == 0.0:
        sigma = 0.5 / sigmas
    lo = max(mean - sigmas * sigma, -0.5)
    hi = min(mean + sigmas * sigma, N + 0.5)
    if not lo < hi:
        lo, hi = -0.5, N + 0.5
    return lo, hi


class _Dual:
    """Dual function Psi(lambda) = log Z(lambda) + lambda . nu on a fixed quadrature."""

    def __init__(self, targets: np.ndarray, support: Tuple[float, float], nodes: int):
        self.targets = targets
        self.m = len(targets)
        a, b = support
        x, w = np.polynomial.legendre.leggauss(nodes)
        self.y = 0.5 * (b - a) * x + 0.5 * (b + a)
        self.log_w = np.log(0.5 * (b - a) * w)
        self.powers = np.vstack([self.y ** k for k in range(1, self.m + 1)])

    def log_weights(self, lambdas: np.ndarray) -> Tuple[np.ndarray, float]:
        exponent = -lambdas @ self.powers + self.log_w
        log_z = float(logsumexp(exponent))
        return exponent - log_z, log_z

    def value(self, lambdas: np.ndarray) -> float:
        _, log_z = self.log_weights(lambdas)
        return log_z + float(lambdas @ self.targets)

    def gradient_hessian(self, lambdas: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
        log_p, log_z = self.log_weights(lambdas)
        p = np.exp(log_p)
        expected = self.powers @ p
        centered = self.powers - expected[:, None]
        hessian = (centered * p) @ centered.T
        return self.targets - expected, hessian, log_z


def _newton(dual: _Dual, start: np.ndarray) -> Tuple[np.ndarray, int, float]:
    lambdas = start.copy()
    c = MAXENT_CONFIG['armijo_c']
    norm = np.inf
    for iteration in range(1, MAXENT_CONFIG['max_iterations'] + 1):
        gradient, hessian, _ = dual.gradient_hessian(lambdas)
        norm = float(np.linalg.norm(gradient))
        if norm <= MAXENT_CONFIG['gradient_tolerance']:
            return lambdas, iteration, norm
        try:
            step = np.linalg.solve(hessian, gradient)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hessian, gradient, rcond=None)[0]
        current = dual.value(lambdas)
        slope = float(gradient @ step)
        t = 1.0
        while t > 1e-12:
            candidate = lambdas - t * step
            if dual.value(candidate) <= current - c * t * slope:
                break
            t *= 0.5
        else:
            logger.debug(f"Line search stalled at iteration {iteration} (|grad|={norm:.3e})")
            break
        lambdas = candidate
    gradient, _, _ = dual.gradient_hessian(lambdas)
    norm = float(np.linalg.norm(gradient))
    if norm <= MAXENT_CONFIG['gradient_tolerance']:
        return lambdas, MAXENT_CONFIG['max_iterations'], norm
    raise MaxEntConvergenceError(MAXENT_CONFIG['max_iterations'], norm)


@dataclass
class MaxEntDensity:
    """
    p(x) = exp(-sum_k lambda_k y^k) / Z with y = (x - shift) / scale on the support.

    ``lambdas`` and ``log_z`` refer to the standardized variable y.
    """
    lambdas: np.ndarray
    log_z: float
    support: Tuple[float, float]
    shift: float
    scale: float
    nodes: int
    iterations: int = 0
    gradient_norm: float = 0.0
    warnings: list = field(default_factory=list)

    def _standard(self, x):
        return (np.asarray(x, dtype=float) - self.shift) / self.scale

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self._standard(x)
        exponent = -sum(l * y ** (k + 1) for k, l in enumerate(self.lambdas)) - self.log_z
        inside = (x >= self.support[0]) & (x <= self.support[1])
        return np.where(inside, np.exp(exponent) / self.scale, 0.0)

    def interval_prob(self, lo: float, hi: float) -> float:
        """Probability of [lo, hi] (clipped to the support) by Gauss-Legendre quadrature."""
        a = max(float(lo), self.support[0])
        b = min(float(hi), self.support[1])
        if not b > a:
            return 0.0
        x, w = np.polynomial.legendre.leggauss(self.nodes)
        y = 0.5 * (b - a) * x + 0.5 * (b + a)
        value = float(np.sum(0.5 * (b - a) * w * self.pdf(y)))
        return float(np.clip(value, 0.0, 1.0))

    def moments(self, order: Optional[int] = None) -> np.ndarray:
        """Non-centred moments E[x^k] of the reconstruction, k = 1..order."""
        order = order or len(self.lambdas)
        a, b = self.support
        x, w = np.polynomial.legendre.leggauss(self.nodes)
        points = 0.5 * (b - a) * x + 0.5 * (b + a)
        weights = 0.5 * (b - a) * w * self.pdf(points)
        return np.array([float(np.sum(weights * points ** k)) for k in range(1, order + 1)])

    def to_frame(self, points: int = 500) -> pd.DataFrame:
        x = np.linspace(self.support[0], self.support[1], points)
        return pd.DataFrame({'x': x, 'density': self.pdf(x)})

    def to_csv(self, path, points: int = 500) -> None:
        self.to_frame(points).to_csv(path, index=False)
        logger.info(f"Saved max-entropy density samples to {path}")


def _cut_probabilities(density: MaxEntDensity) -> np.ndarray:
    a, b = density.support
    cuts = np.linspace(a, b, 9)
    return np.array([density.interval_prob(a, c) for c in cuts[1:-1]])


def reconstruct(c: MomentConstraints, start: Optional[Sequence[float]] = None) -> MaxEntDensity:
    """
    Maximum entropy density matching ``c``.

    The dual is minimized by damped Newton iterations on standardized
    moments; the quadrature is refined by doubling its nodes until interval
    probabilities are stable.

    Args:
        c: Moment constraints
        start: Initial multipliers (standardized scale)

    Returns:
        MaxEntDensity

    Raises:
        MomentFeasibilityError: the moments are infeasible
        MaxEntConvergenceError: Newton iterations did not converge
    """
    shift, scale = c.standardization()
    targets = c.standardized()
    lo, hi = c.support
    support_std = ((lo - shift) / scale, (hi - shift) / scale)

    if start is None:
        lambdas = np.zeros(c.order)
        if c.order >= 2:
            lambdas[1] = 0.5
    else:
        lambdas = np.asarray(start, dtype=float)

    nodes = MAXENT_CONFIG['quadrature_nodes']
    density, previous = None, None
    for doubling in range(MAXENT_CONFIG['max_quadrature_doublings'] + 1):
        dual = _Dual(targets, support_std, nodes)
        lambdas, iterations, norm = _newton(dual, lambdas)
        _, log_z = dual.log_weights(lambdas)
        density = MaxEntDensity(lambdas=lambdas.copy(), log_z=log_z, support=(lo, hi),
                                shift=shift, scale=scale, nodes=nodes,
                                iterations=iterations, gradient_norm=norm)
        masses = _cut_probabilities(density)
        if previous is not None and np.max(np.abs(masses - previous)) < MAXENT_CONFIG['quadrature_tolerance']:
            break
        previous = masses
        nodes *= 2
    logger.debug(
        f"Max-entropy reconstruction of order {c.order}: {density.iterations} Newton iterations, "
        f"{density.nodes} quadrature nodes, |grad|={density.gradient_norm:.2e}"
    )
    return density


def interval_prob(d: MaxEntDensity, lo: float, hi: float) -> float:
    return d.interval_prob(lo, hi)
