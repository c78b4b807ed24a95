"""
Verification pipeline for the Population Model Checker
Loads a model and a property, runs one verb and writes its CSV/JSON artifacts
"""
import dataclasses
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from config.settings import CURVE_CONFIG
from src.checking.collective import (GlobalFormulaChecker, PathGlobalChecker,
                                     check_global_formula, resolve_args)
from src.checking.individual import CslTaChecker, path_prob_curves, path_prob_fixed
from src.checking.schedule import parse_method
from src.checking.oracle import SampledEstimator
from src.errors import (DeterminismError, DensityDependenceError, DslSyntaxError, GlobalCheckError,
                        MaxEntConvergenceError, ModelValidationError, MomentFeasibilityError,
                        NumericalFailureError, StateSpaceLimitError, StiffnessError,
                        UnknownActionError, UnsupportedRateError, UsageError)
from src.model.parser import load_model
from src.model.population import PopulationModel
from src.ode.fluid import cla_moments, cla_solve, fluid_solve
from src.ode.moments import MomentSpec, mean_and_covariance, moment_solve
from src.properties.dta import OneGDTA
from src.properties.logic import CslTaFormula, GlobalProperty, satisfies_bound
from src.properties.parser import load_properties
from src.runner.config import RunConfig
from src.ssa.estimators import estimate_global_path_prob, estimate_local_path_prob
from src.ssa.gillespie import gillespie_run
from src.synchronize.product import synchronize

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_STRICT = 3

NUMERICAL_ERRORS = (StiffnessError, NumericalFailureError, MomentFeasibilityError,
                    MaxEntConvergenceError, StateSpaceLimitError, ArithmeticError,
                    np.linalg.LinAlgError)
USAGE_ERRORS = (DslSyntaxError, ModelValidationError, DensityDependenceError, UnsupportedRateError,
                DeterminismError, UnknownActionError, UsageError, ValidationError,
                FileNotFoundError)

Property = Union[OneGDTA, CslTaFormula, GlobalProperty]


def exit_code_for(exc: BaseException) -> int:
    """1 for usage, parse and validation errors; 2 for numerical failures."""
    if isinstance(exc, GlobalCheckError) and exc.cause is not None:
        return exit_code_for(exc.cause)
    if isinstance(exc, NUMERICAL_ERRORS):
        return EXIT_NUMERICAL
    if isinstance(exc, USAGE_ERRORS):
        return EXIT_USAGE
    return EXIT_NUMERICAL


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Fraction):
        return float(value)
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def _with_horizon(atom: GlobalProperty, T: float) -> GlobalProperty:
    return dataclasses.replace(atom, horizon=Fraction(T).limit_denominator(10**9))


class VerificationPipeline:
    """
    Runs one CLI verb end to end.

    Handles:
    - Loading the model (with N and parameter overrides) and the property
    - Dispatching to the fluid/CLA/moment solvers, the checkers or the SSA
    - Writing CSV and JSON artifacts that embed the run configuration
    - Mapping failures to exit codes
    """

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.model: Optional[PopulationModel] = None
        self.prop: Optional[Property] = None
        self.warnings: List[str] = []
        self.artifacts: Dict[str, str] = {}
        self.run_stats: Dict[str, Any] = {
            'start_time': None,
            'end_time': None,
            'status': 'initialized',
            'seconds': None,
            'errors': [],
        }
        logger.debug(f"Pipeline initialized for '{cfg.verb}' ({cfg.method})")

    # Loading

    def load_model(self, n: Optional[int] = None) -> PopulationModel:
        return load_model(self.cfg.model_path, n=n or self.cfg.n, params=self.cfg.params or None)

    def load_property(self) -> Optional[Property]:
        if self.cfg.property_path is None:
            return None
        properties = load_properties(self.cfg.property_path)
        return properties.get(self.cfg.property_name) if self.cfg.property_name \
            else properties.main()

    # Verbs

    def run_fluid(self) -> Tuple[Dict[str, Any], pd.DataFrame]:
        """Mean (and variance) trajectories of the population counts."""
        model, cfg = self.model, self.cfg
        T = float(cfg.horizon)
        grid = np.linspace(0.0, T, cfg.grid_points)
        name, order = cfg.method_name, None
        frame = pd.DataFrame({'t': grid})
        if name == 'fluid':
            solution = fluid_solve(model, T, cfg=cfg.solver_overrides)
            means = model.N * solution(grid)
            variances = None
        elif name == 'cla':
            solution = cla_solve(model, T, cfg=cfg.solver_overrides)
            means, cov = cla_moments(solution, model.N, grid)
            variances = np.diagonal(cov, axis1=-2, axis2=-1)
        else:
            order = parse_method(cfg.method)[1] or CURVE_CONFIG['moment_order']
            spec = MomentSpec.for_model(model, order)
            solution = moment_solve(model, spec, T, cfg=cfg.solver_overrides)
            pairs = [mean_and_covariance(solution, spec, t) for t in grid]
            means = np.array([m for m, _ in pairs])
            variances = np.array([np.diag(c) for _, c in pairs]) if order >= 2 else None
        for i, v in enumerate(model.variables):
            frame[f"X_{v}"] = means[:, i]
        if variances is not None:
            for i, v in enumerate(model.variables):
                frame[f"Var_{v}"] = variances[:, i]
        result = {
            'method': cfg.method,
            'N': model.N,
            'horizon': T,
            'final_mean': dict(zip(model.variables, means[-1].tolist())),
            'solver': dict(solution.stats),
        }
        return result, frame

    def _local_automaton(self) -> Tuple[OneGDTA, float, Optional[CslTaFormula]]:
        prop = self.prop
        if isinstance(prop, OneGDTA):
            if self.cfg.horizon is None:
                raise UsageError(f"automaton {prop.name} needs --horizon")
            return prop, float(self.cfg.horizon), None
        if isinstance(prop, CslTaFormula):
            if prop.op == 'prob':
                return prop.dta, float(prop.horizon), prop
            return None, 0.0, prop
        raise UsageError("local checking needs a CSL-TA formula or an automaton")

    def _states_of_interest(self) -> List[str]:
        if self.cfg.state is not None:
            if self.cfg.state not in self.model.states:
                raise UsageError(f"unknown agent state '{self.cfg.state}'")
            return [self.cfg.state]
        return list(self.model.states)

    def run_check_local(self) -> Tuple[Dict[str, Any], Optional[pd.DataFrame]]:
        """Satisfaction signals of a CSL-TA formula and the underlying probability curves."""
        cfg, model = self.cfg, self.model
        d, T, formula = self._local_automaton()
        result: Dict[str, Any] = {'method': cfg.method, 'N': model.N, 't0_max': cfg.t0_max}
        frame = None
        if cfg.method_name == 'ssa':
            if d is None or d.props:
                raise UsageError("SSA local checking needs an automaton without propositions")
            points = min(cfg.grid_points, CURVE_CONFIG['ssa_grid_points'])
            grid = np.linspace(0.0, cfg.t0_max, points) if cfg.t0_max > 0 else np.array([0.0])
            frame = pd.DataFrame({'t0': grid})
            estimates = {}
            for s in self._states_of_interest():
                column, rows = [], []
                for t0 in grid:
                    try:
                        ci = estimate_local_path_prob(model, d, s, T, t0=float(t0), runs=cfg.runs,
                                                      seed=cfg.seed, quiet=cfg.quiet)
                    except ValueError as exc:
                        self.warnings.append(f"{s}@t0={t0:g}: {exc}")
                        column.append(np.nan)
                        continue
                    column.append(ci.estimate)
                    rows.append({'t0': float(t0), **ci.to_dict()})
                frame[f"p_{s}"] = column
                estimates[s] = rows
            result['estimates'] = estimates
            if formula is not None and formula.op == 'prob':
                result['verdict_t0'] = {
                    s: satisfies_bound(frame[f"p_{s}"].iloc[0], formula.comparator, formula.bound)
                    for s in estimates if not np.isnan(frame[f"p_{s}"].iloc[0])
                }
            return result, frame

        if d is not None and not d.props:
            curves = path_prob_curves(d, model, T, cfg.t0_max, cfg.method,
                                      grid_points=cfg.grid_points, cfg=cfg.solver_overrides)
            grid = next(iter(curves.values())).grid
            frame = pd.DataFrame({'t0': grid})
            for s in model.states:
                frame[f"p_{s}"] = curves[s].values
                self.warnings.extend(curves[s].warnings)
            result['probability_t0'] = {s: float(curves[s].values[0]) for s in model.states}
        if formula is not None:
            checker = CslTaChecker(model, cfg.method, grid_points=cfg.grid_points,
                                   cfg=cfg.solver_overrides)
            signals = checker.check(formula, cfg.t0_max)
            result['formula'] = str(formula)
            result['signals'] = {s: sig.to_dict() for s, sig in signals.items()}
            result['verdict_t0'] = {s: sig.value(0.0) for s, sig in signals.items()}
            result['checker'] = dict(checker.stats)
            for sig in signals.values():
                self.warnings.extend(sig.warnings)
        return result, frame

    def _global_estimator(self, model: PopulationModel):
        if self.cfg.method_name in ('ssa', 'exact'):
            return SampledEstimator(model, self.cfg.method_name, self.cfg.runs, self.cfg.seed,
                                    quiet=self.cfg.quiet)
        return GlobalFormulaChecker(model, self.cfg.method, self.cfg.correct,
                                    cfg=self.cfg.solver_overrides).estimate_atom

    def run_check_global(self) -> Tuple[Dict[str, Any], None]:
        """Verdict tree of a collective property."""
        cfg, model, prop = self.cfg, self.model, self.prop
        if not isinstance(prop, GlobalProperty):
            raise UsageError("global checking needs a global property")
        atoms = prop.atoms()
        estimator = self._global_estimator(model)
        if cfg.workers > 1 and len(atoms) > 1:
            estimator = self._parallel_atoms(atoms)
        root = check_global_formula(prop, model, cfg.method, cfg.correct, estimator,
                                    cfg.solver_overrides)
        self.warnings.extend(root.all_warnings())
        result = {
            'property': str(prop),
            'method': cfg.method,
            'N': model.N,
            'corrected': cfg.correct,
            'verdict': root.verdict,
            'tree': root.to_dict(),
        }
        logger.info(f"Verdict: {root.verdict}")
        return result, None

    def _parallel_atoms(self, atoms) -> Any:
        """Estimate every atom in a worker pool; returns a lookup estimator."""
        manifest = self.cfg.manifest()
        with ProcessPoolExecutor(max_workers=min(self.cfg.workers, len(atoms))) as pool:
            results = list(pool.map(_atom_worker, [manifest] * len(atoms), range(len(atoms))))
        by_id = {id(atom): estimate for atom, estimate in zip(atoms, results)}
        return lambda atom: by_id[id(atom)]

    def run_simulate(self) -> Tuple[Dict[str, Any], pd.DataFrame]:
        """One SSA trajectory, plus estimates with confidence intervals when a property is given."""
        cfg, model = self.cfg, self.model
        T = float(cfg.horizon)
        trajectory = gillespie_run(model, T, cfg.seed, 0)
        frame = trajectory.to_frame()
        result: Dict[str, Any] = {
            'N': model.N,
            'horizon': T,
            'seed': cfg.seed,
            'jumps': int(len(trajectory.times)),
            'final_state': dict(zip(model.variables, trajectory.final_state.tolist())),
        }
        prop = self.prop
        if isinstance(prop, GlobalProperty):
            atom = prop.atoms()[0]
            if atom.op != 'path':
                raise UsageError("simulate estimates path thresholds only")
            d, warnings = resolve_args(model, atom.dta, atom.args, float(atom.horizon), 'fluid')
            self.warnings.extend(warnings)
            estimate = estimate_global_path_prob(model, d, atom.count_bounds(model.N),
                                                 atom.horizon, cfg.runs, cfg.seed,
                                                 quiet=cfg.quiet)[float(atom.horizon)]
            result['estimate'] = estimate.to_dict()
        elif prop is not None:
            d, T_prop, _ = self._local_automaton()
            if d is None or d.props:
                raise UsageError("simulate needs an automaton without propositions")
            result['estimates'] = {
                s: estimate_local_path_prob(model, d, s, T_prop, runs=cfg.runs, seed=cfg.seed,
                                            quiet=cfg.quiet).to_dict()
                for s in self._states_of_interest()
                if model.initial_vector[model.variable_index[s]] > 0
            }
        return result, frame

    def run_sweep(self) -> Tuple[Dict[str, Any], pd.DataFrame]:
        """Estimate as a function of N or of the horizon, with wall-clock columns."""
        axis, values = self.cfg.sweep_values()
        if axis == 'N':
            manifest = self.cfg.manifest()
            if self.cfg.workers > 1 and len(values) > 1:
                with ProcessPoolExecutor(max_workers=min(self.cfg.workers, len(values))) as pool:
                    rows = list(pool.map(_sweep_worker, [manifest] * len(values), values))
            else:
                rows = [self.sweep_point(n=int(n)) for n in values]
        else:
            rows = self.sweep_horizons(values)
        frame = pd.DataFrame(rows)
        result = {'axis': axis, 'values': list(values), 'method': self.cfg.method,
                  'rows': frame.to_dict(orient='records')}
        return result, frame

    def _point_row(self, model: PopulationModel, T: Optional[float]) -> Dict[str, Any]:
        cfg, prop = self.cfg, self.prop
        start = time.perf_counter()
        row: Dict[str, Any] = {'N': model.N, 'method': cfg.method}
        if isinstance(prop, GlobalProperty):
            atom = prop.atoms()[0]
            if T is not None:
                atom = _with_horizon(atom, T)
            estimate = self._global_estimator(model)(atom)
            self.warnings.extend(estimate.warnings)
            row.update({'T': float(atom.horizon) if atom.op == 'path' else float(atom.time),
                        'estimate': estimate.probability, 'corrected': estimate.interval.corrected})
            ci = estimate.diagnostics.get('confidence_interval')
            if ci:
                row.update({'lower': ci['lower'], 'upper': ci['upper']})
        else:
            d, T_prop, _ = self._local_automaton()
            T = T_prop if T is None else T
            s0 = cfg.state or model.states[0]
            if cfg.method_name == 'ssa':
                ci = estimate_local_path_prob(model, d, s0, T, runs=cfg.runs, seed=cfg.seed,
                                              quiet=cfg.quiet)
                row.update({'T': T, 'state': s0, 'estimate': ci.estimate,
                            'lower': ci.lower, 'upper': ci.upper})
            else:
                value = path_prob_fixed(s0, 0.0, d, model, T, cfg.method, cfg=cfg.solver_overrides)
                row.update({'T': T, 'state': s0, 'estimate': value})
            row['corrected'] = False
        row['seconds'] = time.perf_counter() - start
        return row

    def sweep_point(self, n: Optional[int] = None, T: Optional[float] = None) -> Dict[str, Any]:
        model = self.model if n is None else self.load_model(n)
        return self._point_row(model, T)

    def sweep_horizons(self, horizons: List[float]) -> List[Dict[str, Any]]:
        """One solve (or one batch of runs) to the largest horizon serves every horizon."""
        cfg, model, prop = self.cfg, self.model, self.prop
        atom = prop.atoms()[0] if isinstance(prop, GlobalProperty) else None
        if atom is None or atom.op != 'path' or cfg.method_name == 'exact':
            return [self.sweep_point(T=T) for T in horizons]
        T_max = max(horizons)
        d, warnings = resolve_args(model, atom.dta, atom.args, T_max, 'fluid')
        self.warnings.extend(warnings)
        bounds = atom.count_bounds(model.N)
        start = time.perf_counter()
        rows = []
        if cfg.method_name == 'ssa':
            estimates = estimate_global_path_prob(model, d, bounds, T_max, cfg.runs, cfg.seed,
                                                  horizons=horizons, quiet=cfg.quiet)
            elapsed = time.perf_counter() - start
            for T in sorted(horizons):
                ci = estimates[float(T)]
                rows.append({'N': model.N, 'method': cfg.method, 'T': T, 'estimate': ci.estimate,
                             'corrected': False, 'lower': ci.lower, 'upper': ci.upper,
                             'seconds': elapsed})
            return rows
        checker = PathGlobalChecker(model, d, Fraction(T_max).limit_denominator(10**9),
                                    cfg.method, cfg.solver_overrides)
        elapsed = time.perf_counter() - start
        for T in sorted(horizons):
            estimate = checker.estimate(bounds, T, cfg.correct)
            self.warnings.extend(estimate.warnings)
            rows.append({'N': model.N, 'method': cfg.method, 'T': T,
                         'estimate': estimate.probability,
                         'corrected': estimate.interval.corrected, 'seconds': elapsed})
        return rows

    # Artifacts

    def _default_path(self, suffix: str) -> Path:
        prop = getattr(self.prop, 'name', None) or self.cfg.property_name or 'run'
        stem = f"{self.cfg.verb}_{self.model.name}_{prop}".replace(' ', '_')
        return Path(self.cfg.output_dir) / f"{stem}.{suffix}"

    def write_artifacts(self, result: Dict[str, Any], frame: Optional[pd.DataFrame]) -> None:
        os.makedirs(self.cfg.output_dir, exist_ok=True)
        if frame is not None:
            csv_path = self.cfg.csv_path or self._default_path('csv')
            frame.to_csv(csv_path, index=False)
            self.artifacts['csv'] = str(csv_path)
            logger.info(f"Saved {len(frame)} rows to {csv_path}")
        if self.cfg.dump_product and isinstance(self.prop, (OneGDTA, CslTaFormula, GlobalProperty)):
            self._dump_product()
        json_path = self.cfg.json_path or self._default_path('json')
        document = {
            'config': self.cfg.manifest(),
            'result': result,
            'warnings': sorted(set(self.warnings)),
            'stats': {k: v for k, v in self.run_stats.items() if k != 'errors'},
            'artifacts': dict(self.artifacts),
        }
        with open(json_path, 'w', encoding='utf-8') as handle:
            json.dump(_jsonable(document), handle, indent=2, default=str)
        self.artifacts['json'] = str(json_path)
        logger.info(f"Saved results to {json_path}")

    def _dump_product(self) -> None:
        prop = self.prop
        if isinstance(prop, GlobalProperty):
            atom = prop.atoms()[0]
            d, T = (atom.dta, atom.horizon) if atom.op == 'path' else (None, None)
        else:
            d, T, _ = self._local_automaton()
        if d is None or d.props:
            logger.warning("--dump-product needs an automaton without propositions; skipped")
            return
        pm = synchronize(self.model, d, Fraction(T).limit_denominator(10**9))
        path = Path(self.cfg.output_dir) / f"product_{self.model.name}_{d.name}.json"
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(_jsonable(pm.to_dict()), handle, indent=2)
        self.artifacts['product'] = str(path)
        logger.info(f"Saved product model to {path}")

    # Orchestration

    def run(self) -> int:
        """
        Execute the verb.

        Returns:
            Exit status: 0 done, 1 usage/parse error, 2 numerical failure,
            3 warnings raised under --strict
        """
        self.run_stats['start_time'] = datetime.now()
        self.run_stats['status'] = 'running'
        handlers = {
            'fluid': self.run_fluid,
            'check-local': self.run_check_local,
            'check-global': self.run_check_global,
            'simulate': self.run_simulate,
            'sweep': self.run_sweep,
        }
        logger.info("=" * 60)
        logger.info(f"Population Model Checker: {self.cfg.verb} ({self.cfg.method})")
        logger.info("=" * 60)
        try:
            logger.info(f"[Step 1/4] Loading model from {self.cfg.model_path}...")
            self.model = self.load_model()
            logger.info(f"Model '{self.model.name}': N={self.model.N}, "
                        f"{len(self.model.states)} states, {len(self.model.transitions)} transitions")

            logger.info("[Step 2/4] Loading property...")
            self.prop = self.load_property()
            if self.prop is not None:
                logger.info(f"Property: {getattr(self.prop, 'name', None) or self.prop}")

            logger.info(f"[Step 3/4] Running {self.cfg.verb}...")
            result, frame = handlers[self.cfg.verb]()

            self.run_stats['end_time'] = datetime.now()
            self.run_stats['seconds'] = \
                (self.run_stats['end_time'] - self.run_stats['start_time']).total_seconds()
            self.run_stats['status'] = 'completed'

            logger.info("[Step 4/4] Writing artifacts...")
            self.write_artifacts(result, frame)
        except Exception as exc:
            code = exit_code_for(exc)
            self.run_stats['status'] = 'failed'
            self.run_stats['errors'].append(str(exc))
            self.run_stats['end_time'] = datetime.now()
            if code == EXIT_USAGE:
                logger.error(f"{self.cfg.verb} failed: {exc}")
            else:
                logger.error(f"{self.cfg.verb} failed: {exc}", exc_info=True)
            return code

        logger.info(f"Completed in {self.run_stats['seconds']:.2f} seconds")
        if self.warnings:
            logger.warning(f"{len(set(self.warnings))} warning(s) raised")
            if self.cfg.strict:
                logger.error("Warnings escalated by --strict")
                return EXIT_STRICT
        return EXIT_OK


def _atom_worker(manifest: Dict[str, Any], index: int):
    pipeline = VerificationPipeline(RunConfig(**manifest))
    pipeline.model = pipeline.load_model()
    pipeline.prop = pipeline.load_property()
    return pipeline._global_estimator(pipeline.model)(pipeline.prop.atoms()[index])


def _sweep_worker(manifest: Dict[str, Any], n: int) -> Dict[str, Any]:
    pipeline = VerificationPipeline(RunConfig(**manifest))
    pipeline.prop = pipeline.load_property()
    return pipeline.sweep_point(n=int(n))


def run(cfg: RunConfig) -> int:
    return VerificationPipeline(cfg).run()
