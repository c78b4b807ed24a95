"""
Fluid limit and central limit (linear noise) equations of population models
"""
import logging
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from config.settings import SOLVER_CONFIG
from src.model.population import PopulationModel
from src.ode.solver import OdeSolution, OdeSystem, integrate

logger = logging.getLogger(__name__)

ClaInits = Tuple[np.ndarray, np.ndarray, np.ndarray]


def fluid_system(m: PopulationModel) -> OdeSystem:
    """dPhi/dt = F(Phi) over the normalized variables of ``m``."""
    compiled = m.compiled
    compiled.check_density_dependence()
    return OdeSystem(
        dimension=len(m.variables),
        rhs=lambda t, y: compiled.drift(y),
        labels=tuple(m.variables),
    )


def fluid_solve(m: PopulationModel, T: float, t0: float = 0.0,
                x0: Optional[Sequence[float]] = None, cfg: Optional[dict] = None) -> OdeSolution:
    """
    Solve the fluid limit of ``m`` on [t0, t0 + T].

    Args:
        m: Density-dependent population model
        T: Length of the time interval
        t0: Start time
        x0: Normalized initial state; defaults to the model's initial density
        cfg: Solver overrides

    Returns:
        OdeSolution of Phi(t)
    """
    x0 = m.initial_density if x0 is None else np.asarray(x0, dtype=float)
    solution = integrate(fluid_system(m), t0, t0 + T, x0, cfg)
    logger.info(
        f"Fluid limit of {m.name} on [{t0:g}, {t0 + T:g}]: {solution.stats['steps']} steps, "
        f"{solution.stats['rejected']} rejected, {solution.stats['rhs_evals']} RHS evaluations"
    )
    return solution


def _project_covariance(C: np.ndarray, clip: float) -> np.ndarray:
    C = 0.5 * (C + C.T)
    w, V = np.linalg.eigh(C)
    small = (w < 0) & (w >= -clip)
    if small.any():
        w = np.where(small, 0.0, w)
        C = (V * w) @ V.T
        C = 0.5 * (C + C.T)
    return C


def cla_labels(variables: Sequence[str]) -> Tuple[str, ...]:
    phi = [f"Phi_{v}" for v in variables]
    e = [f"E_{v}" for v in variables]
    c = [f"C_{a}_{b}" for a in variables for b in variables]
    return tuple(phi + e + c)


def cla_system(m: PopulationModel) -> OdeSystem:
    """
    Joint system of the fluid limit, the mean correction E and the covariance C.

        dPhi/dt = F(Phi)
        dE/dt   = J_F(Phi) E
        dC/dt   = J_F(Phi) C + C J_F(Phi)^T + D(Phi)
    """
    compiled = m.compiled
    compiled.check_density_dependence()
    d = len(m.variables)
    clip = SOLVER_CONFIG['covariance_clip']

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        phi, e, c = y[:d], y[d:2 * d], y[2 * d:].reshape(d, d)
        jac = compiled.jacobian(phi)
        dc = jac @ c + c @ jac.T + compiled.diffusion(phi)
        return np.concatenate([compiled.drift(phi), jac @ e, dc.reshape(-1)])

    def post_step(y: np.ndarray) -> np.ndarray:
        y = y.copy()
        y[2 * d:] = _project_covariance(y[2 * d:].reshape(d, d), clip).reshape(-1)
        return y

    return OdeSystem(dimension=d * (d + 2), rhs=rhs, labels=cla_labels(m.variables),
                     post_step=post_step)


def cla_initial(m: PopulationModel, inits: Optional[ClaInits] = None) -> np.ndarray:
    d = len(m.variables)
    if inits is None:
        return np.concatenate([m.initial_density, np.zeros(d), np.zeros(d * d)])
    phi0, e0, c0 = (np.asarray(v, dtype=float) for v in inits)
    c0 = c0.reshape(d, d)
    if not np.allclose(c0, c0.T, atol=1e-12):
        raise ValueError("initial covariance must be symmetric")
    if np.linalg.eigvalsh(c0).min() < -SOLVER_CONFIG['covariance_clip']:
        raise ValueError("initial covariance must be positive semi-definite")
    return np.concatenate([phi0, e0, c0.reshape(-1)])


def cla_solve(m: PopulationModel, T: float, inits: Optional[ClaInits] = None,
              t0: float = 0.0, cfg: Optional[dict] = None) -> OdeSolution:
    """
    Solve the central limit equations of ``m`` on [t0, t0 + T].

    Args:
        m: Density-dependent population model
        T: Length of the time interval
        inits: (Phi0, E0, C0); defaults to (initial density, 0, 0)
        t0: Start time
        cfg: Solver overrides

    Returns:
        OdeSolution over the flattened (Phi, E, C) state
    """
    y0 = cla_initial(m, inits)
    solution = integrate(cla_system(m), t0, t0 + T, y0, cfg)
    logger.info(
        f"Central limit equations of {m.name} on [{t0:g}, {t0 + T:g}]: "
        f"{solution.stats['steps']} steps, {solution.stats['rejected']} rejected, "
        f"{solution.stats['rhs_evals']} RHS evaluations"
    )
    return solution


def split_cla_state(y: np.ndarray, d: int) -> ClaInits:
    y = np.asarray(y, dtype=float)
    return y[:d].copy(), y[d:2 * d].copy(), y[2 * d:].reshape(d, d).copy()


def cla_moments(solution: OdeSolution, N: int,
                t: Union[float, Sequence[float]]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Population-scale mean N Phi + sqrt(N) E and covariance N C at time(s) ``t``.
    """
    y = solution(t)
    size = y.shape[-1]
    d = int(round(np.sqrt(size + 1) - 1))
    phi, e = y[..., :d], y[..., d:2 * d]
    c = y[..., 2 * d:].reshape(y.shape[:-1] + (d, d))
    return N * phi + np.sqrt(N) * e, N * c


def chained_solve(regions: Sequence[PopulationModel], times: Sequence[float], method: str = 'fluid',
                  cfg: Optional[dict] = None, y0: Optional[np.ndarray] = None) -> OdeSolution:
    """
    Solve region by region, each region starting from where the previous one ended.

    Args:
        regions: One population model per interval [times[j], times[j+1]]
        times: Region boundaries
        method: 'fluid' or 'cla'
        cfg: Solver overrides
        y0: Initial state; defaults to the first region's initial condition
    """
    if method not in ('fluid', 'cla'):
        raise ValueError(f"unknown chained method '{method}'")
    solution: Optional[OdeSolution] = None
    y = y0
    for j, (model, lo, hi) in enumerate(zip(regions, times, times[1:])):
        lo, hi = float(lo), float(hi)
        if method == 'fluid':
            piece = fluid_solve(model, hi - lo, t0=lo, x0=y, cfg=cfg)
        else:
            d = len(model.variables)
            inits = None if y is None else split_cla_state(y, d)
            piece = cla_solve(model, hi - lo, inits=inits, t0=lo, cfg=cfg)
        logger.debug(f"Region {j} [{lo:g}, {hi:g}] solved with {method}")
        solution = piece if solution is None else solution.concatenate(piece)
        y = piece.y_end
    return solution
