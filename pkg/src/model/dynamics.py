"""
Numerical evaluation of population model dynamics: rates, drift, diffusion
"""
import logging
from typing import List, Tuple

import numpy as np

from config.settings import MODEL_CONFIG
from src.errors import DensityDependenceError
from src.model.population import GlobalTransition, PopulationModel
from src.model.rates import compile_gradients, compile_rates

logger = logging.getLogger(__name__)


class CompiledModel:
    """
    Lambdified rate functions of a population model.

    Holds two views of every rate: the exact one used on integer states
    (simulation, generator assembly) and the continuous one used by the
    fluid, central limit and moment engines.
    """

    def __init__(self, model: PopulationModel):
        self.model = model
        self.variables = model.variables
        self.N = model.N
        self.updates = model.update_matrix.astype(float)
        self.guards = model.guard_matrix
        self._exact = compile_rates(model.bound_rates(), self.variables)
        continuous = model.bound_rates(continuous=True)
        self._continuous = compile_rates(continuous, self.variables)
        self.polynomial = all(
            t.rate.bind(model.params).is_polynomial(model.states, continuous=True)
            for t in model.transitions
        )
        self._gradients = compile_gradients(continuous, self.variables) if self.polynomial else None
        self._warned = set()
        self._density_checked = False

    def _clamp(self, values: np.ndarray) -> np.ndarray:
        negative = values < -MODEL_CONFIG['negative_rate_warning']
        if negative.any():
            for i in np.flatnonzero(negative):
                name = self.model.transitions[i].name
                if name not in self._warned:
                    self._warned.add(name)
                    logger.warning(
                        f"Rate of '{name}' evaluated to {values[i]:.3e} < 0; clamped to 0"
                    )
        return np.maximum(values, 0.0)

    def exact_rates(self, x: np.ndarray) -> np.ndarray:
        """Rates at an integer state; zero where too few agents are available."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide='ignore', invalid='ignore'):
            values = np.asarray(self._exact(x, self.N), dtype=float).reshape(-1)
        values = np.nan_to_num(values, nan=0.0, posinf=0.0, neginf=0.0)
        enabled = np.all(x >= self.guards, axis=1)
        return np.where(enabled, self._clamp(values), 0.0)

    def continuous_rates(self, X: np.ndarray, n: float = None) -> np.ndarray:
        """Continuous rates at population-scale (possibly fractional) counts."""
        n = self.N if n is None else n
        with np.errstate(divide='ignore', invalid='ignore'):
            values = np.asarray(self._continuous(np.asarray(X, dtype=float), n),
                                dtype=float).reshape(-1)
        values = np.nan_to_num(values, nan=0.0, posinf=0.0, neginf=0.0)
        return self._clamp(values)

    def raw_continuous_rates(self, X: np.ndarray, n: float) -> np.ndarray:
        with np.errstate(divide='ignore', invalid='ignore'):
            values = np.asarray(self._continuous(np.asarray(X, dtype=float), n),
                                dtype=float).reshape(-1)
        return np.nan_to_num(values, nan=0.0, posinf=0.0, neginf=0.0)

    def density_rates(self, xhat: np.ndarray) -> np.ndarray:
        """f(N x) / N, the per-capita rates at a normalized state."""
        self.check_density_dependence()
        return self.continuous_rates(self.N * np.asarray(xhat, dtype=float)) / self.N

    def drift(self, xhat: np.ndarray) -> np.ndarray:
        return self.updates.T @ self.density_rates(xhat)

    def diffusion(self, xhat: np.ndarray) -> np.ndarray:
        rates = self.density_rates(xhat)
        return (self.updates.T * rates) @ self.updates

    def jacobian(self, xhat: np.ndarray) -> np.ndarray:
        """Jacobian of the drift; symbolic for polynomial rates."""
        xhat = np.asarray(xhat, dtype=float)
        if self._gradients is not None:
            self.check_density_dependence()
            grads = np.asarray(self._gradients(self.N * xhat, self.N), dtype=float)
            grads = grads.reshape(len(self.model.transitions), len(self.variables))
            return self.updates.T @ grads
        return self.finite_difference_jacobian(xhat)

    def finite_difference_jacobian(self, xhat: np.ndarray) -> np.ndarray:
        xhat = np.asarray(xhat, dtype=float)
        dim = len(xhat)
        jac = np.zeros((dim, dim))
        for j in range(dim):
            h = 1e-6 * max(1.0, abs(xhat[j]))
            up, down = xhat.copy(), xhat.copy()
            up[j] += h
            down[j] -= h
            jac[:, j] = (self._raw_drift(up) - self._raw_drift(down)) / (2 * h)
        return jac

    def _raw_drift(self, xhat: np.ndarray) -> np.ndarray:
        return self.updates.T @ (self.raw_continuous_rates(self.N * xhat, self.N) / self.N)

    def check_density_dependence(self) -> None:
        """
        Verify that f(N x)/N does not depend on N.

        Evaluated at two population sizes on random normalized states; raises
        DensityDependenceError naming the first offending transition.
        """
        if self._density_checked:
            return
        n1, n2 = MODEL_CONFIG['density_sizes']
        rng = np.random.default_rng(MODEL_CONFIG['density_seed'])
        n_states = len(self.model.states)
        n_counters = len(self.model.counters)
        points = rng.dirichlet(np.ones(n_states), size=MODEL_CONFIG['density_samples'])
        points = np.hstack([points, np.zeros((len(points), n_counters))])
        worst = np.zeros(len(self.model.transitions))
        for xhat in points:
            a = self.raw_continuous_rates(n1 * xhat, n1) / n1
            b = self.raw_continuous_rates(n2 * xhat, n2) / n2
            scale = np.maximum(np.abs(a), np.abs(b))
            rel = np.where(scale > 0, np.abs(a - b) / np.where(scale > 0, scale, 1.0), 0.0)
            worst = np.maximum(worst, rel)
        bad = np.flatnonzero(worst > MODEL_CONFIG['density_tolerance'])
        if bad.size:
            i = int(bad[0])
            raise DensityDependenceError(self.model.transitions[i].name, float(worst[i]))
        self._density_checked = True


def drift(m: PopulationModel, xhat: np.ndarray) -> np.ndarray:
    """
    Drift F(x) = sum_tau v_tau f_tau(x) at a normalized state.

    Args:
        m: Density-dependent population model
        xhat: Normalized state (counts / N), counters included if any

    Returns:
        Drift vector; agent-state components sum to zero
    """
    return m.compiled.drift(xhat)


def diffusion(m: PopulationModel, xhat: np.ndarray) -> np.ndarray:
    """Diffusion D(x) = sum_tau v_tau v_tau^T f_tau(x); symmetric PSD."""
    return m.compiled.diffusion(xhat)


def jacobian(m: PopulationModel, xhat: np.ndarray) -> np.ndarray:
    return m.compiled.jacobian(xhat)


def enabled_transitions(m: PopulationModel,
                        x: np.ndarray) -> List[Tuple[GlobalTransition, float, np.ndarray]]:
    """
    Evaluate every global transition at an integer state.

    Transitions needing more agents than available get rate 0.

    Args:
        m: Population model
        x: Integer counts over ``m.variables`` (or over the agent states only)

    Returns:
        (transition, rate, update vector) triples in model order
    """
    x = np.asarray(x, dtype=float)
    if len(x) == len(m.states) and m.counters:
        x = np.concatenate([x, np.asarray(m.initial_counters, dtype=float)])
    rates = m.compiled.exact_rates(x)
    return [
        (t, float(r), m.update_matrix[i].copy())
        for i, (t, r) in enumerate(zip(m.transitions, rates))
    ]
