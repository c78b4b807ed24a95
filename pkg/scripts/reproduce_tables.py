"""
Error and speed-up tables of the approximations against SSA

For every population size (and optionally every randomly drawn parameter set)
the script compares an approximate probability curve over the horizon with
the SSA estimate of the same curve and reports the maximum, time-averaged,
final and relative errors together with the wall-clock costs.
"""
import argparse
import dataclasses
import json
import logging
import logging.config
import os
import sys
import time
from fractions import Fraction
from typing import Dict, List, Optional

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np
import pandas as pd
from tqdm import tqdm

from config.settings import DATA_CONFIG, LOGGING_CONFIG, SSA_CONFIG
from src.checking.collective import PathGlobalChecker, resolve_args
from src.checking.individual import local_product, path_prob_fixed
from src.checking.schedule import rate_schedule
from src.errors import UsageError
from src.model.parser import load_model
from src.model.population import PopulationModel
from src.properties.dta import OneGDTA, dta_accepts
from src.properties.logic import CslTaFormula, GlobalProperty
from src.properties.parser import load_properties
from src.ssa.estimators import simulate_final_counts, tagged_agent_path
from src.ssa.gillespie import replication_rng
from src.synchronize.product import synchronize

logger = logging.getLogger('reproduce_tables')

# Uniform sampling ranges of the random parameter study
PARAM_RANGES = {
    'k_inf': (0.05, 5.0),
    'k_patch1': (0.02, 2.0),
    'k_loss': (0.01, 1.0),
    'k_ext': (0.05, 5.0),
    'k_patch0': (0.001, 0.1),
}
ALPHA_RANGES = {
    'alpha1': (0.1, 0.95),
    'alpha2': (0.1, 0.3),
}


class TableReproducer:
    """
    Compares one approximation with SSA over a horizon grid.

    Local properties (a probability operator or a bare automaton) compare
    P(s0, 0 |= D) for every horizon T on the grid; global path thresholds
    compare the probability of the threshold event.
    """

    def __init__(self, model_path: str, prop, method: Optional[str], runs: int, seed: int,
                 grid_points: int, state: Optional[str] = None, horizon: Optional[float] = None):
        self.model_path = model_path
        self.prop = prop
        self.runs = runs
        self.seed = seed
        self.grid_points = grid_points
        self.state = state
        if isinstance(prop, GlobalProperty):
            self.mode = 'global'
            self.atom = prop.atoms()[0]
            if self.atom.op != 'path':
                raise UsageError("global tables need a path threshold")
            self.horizon = float(self.atom.horizon)
        else:
            self.mode = 'local'
            if isinstance(prop, CslTaFormula) and prop.op == 'prob':
                self.dta, self.horizon = prop.dta, float(prop.horizon)
            elif isinstance(prop, OneGDTA):
                if horizon is None:
                    raise UsageError(f"automaton {prop.name} needs --horizon")
                self.dta, self.horizon = prop, float(horizon)
            else:
                raise UsageError("local tables need a probability operator or an automaton")
            if self.dta.props:
                raise UsageError("local tables need an automaton without propositions")
        self.method = method or ('cla' if self.mode == 'global' else 'fluid')
        self.grid = np.linspace(self.horizon / grid_points, self.horizon, grid_points)

    def load(self, n: int, params: Optional[Dict[str, float]] = None) -> PopulationModel:
        return load_model(self.model_path, n=n, params=params)

    # Local

    def _local_approx(self, model: PopulationModel, s0: str) -> np.ndarray:
        product = local_product(model, self.dta, self.horizon)
        schedule = rate_schedule(product, model, self.method, self.horizon)
        return np.array([path_prob_fixed(s0, 0.0, self.dta, model, T, self.method,
                                         schedule=schedule) for T in self.grid])

    def _local_ssa(self, model: PopulationModel, s0: str, seed: int) -> np.ndarray:
        labels = model.agent_class.labels
        accepted = np.zeros(len(self.grid))
        used = 0
        for i in tqdm(range(self.runs), desc=f"SSA N={model.N}", leave=False):
            path = tagged_agent_path(model, s0, 0.0, self.horizon, replication_rng(seed, i))
            if path is None:
                continue
            used += 1
            accepted += [dta_accepts(self.dta, path, float(T), alphabet=labels) for T in self.grid]
        if used == 0:
            raise UsageError(f"no agent starts in '{s0}'")
        return accepted / used

    # Global

    def _global_atom(self, alpha: Optional[float]) -> GlobalProperty:
        if alpha is None:
            return self.atom
        return dataclasses.replace(self.atom, lower=Fraction(alpha).limit_denominator(10**6))

    def _global_approx(self, model: PopulationModel, atom: GlobalProperty, correct: bool) -> np.ndarray:
        d, _ = resolve_args(model, atom.dta, atom.args, self.horizon, 'fluid')
        checker = PathGlobalChecker(model, d, atom.horizon, self.method)
        bounds = atom.count_bounds(model.N)
        return np.array([checker.estimate(bounds, T, correct).probability for T in self.grid])

    def _global_ssa(self, model: PopulationModel, atom: GlobalProperty, seed: int) -> np.ndarray:
        d, _ = resolve_args(model, atom.dta, atom.args, self.horizon, 'fluid')
        pm = synchronize(model, d, atom.horizon)
        counts = simulate_final_counts(pm, self.grid, self.runs, seed)
        lo, hi = atom.count_bounds(model.N)
        lo, hi = int(np.ceil(float(lo))), int(np.floor(float(hi)))
        return ((counts >= lo) & (counts <= hi)).mean(axis=0)

    def row(self, n: int, params: Optional[Dict[str, float]] = None,
            alpha: Optional[float] = None, correct: bool = True, set_index: int = 0) -> Dict:
        """Errors and timings for one population size and parameter set."""
        model = self.load(n, params)
        seed = self.seed + set_index
        start = time.perf_counter()
        if self.mode == 'local':
            s0 = self.state or model.states[0]
            approx = self._local_approx(model, s0)
            approx_seconds = time.perf_counter() - start
            start = time.perf_counter()
            reference = self._local_ssa(model, s0, seed)
        else:
            atom = self._global_atom(alpha)
            approx = self._global_approx(model, atom, correct)
            approx_seconds = time.perf_counter() - start
            start = time.perf_counter()
            reference = self._global_ssa(model, atom, seed)
        ssa_seconds = time.perf_counter() - start

        errors = np.abs(approx - reference)
        final_ref = float(reference[-1])
        standard_error = float(np.sqrt(max(final_ref * (1 - final_ref), 0.0) / self.runs))
        return {
            'N': n,
            'set': set_index,
            'method': self.method,
            'corrected': bool(correct) if self.mode == 'global' else False,
            'max_error': float(errors.max()),
            'mean_error': float(errors.mean()),
            'final_error': float(errors[-1]),
            'relative_error': float(errors[-1] / final_ref) if final_ref > 0 else float('nan'),
            'ssa_final': final_ref,
            'ssa_standard_error': standard_error,
            'approx_seconds': approx_seconds,
            'ssa_seconds': ssa_seconds,
            'speedup': ssa_seconds / approx_seconds if approx_seconds > 0 else float('inf'),
            **({f"param_{k}": v for k, v in (params or {}).items()}),
            **({'alpha': alpha} if alpha is not None else {}),
        }


def sample_parameter_sets(count: int, seed: int, alpha_key: Optional[str]) -> List[Dict]:
    """Parameter sets drawn uniformly from the study ranges."""
    rng = np.random.default_rng(seed)
    sets = []
    for _ in range(count):
        params = {k: float(rng.uniform(lo, hi)) for k, (lo, hi) in PARAM_RANGES.items()}
        alpha = float(rng.uniform(*ALPHA_RANGES[alpha_key])) if alpha_key else None
        sets.append({'params': params, 'alpha': alpha})
    return sets


def summarize(df: pd.DataFrame) -> pd.DataFrame:
    """Per-N averages over parameter sets."""
    columns = ['max_error', 'mean_error', 'final_error', 'relative_error',
               'approx_seconds', 'ssa_seconds', 'speedup']
    return df.groupby('N')[columns].mean().reset_index()


def main():
    """Build the tables."""
    parser = argparse.ArgumentParser(
        description='Reproduce error and speed-up tables of the approximations against SSA'
    )
    parser.add_argument('model', help='Population model file (.pop)')
    parser.add_argument('property', help='Property file (.prop)')
    parser.add_argument('--name', help='Property to use (default: the last "check" statement)')
    parser.add_argument('--method', '-m', help='Approximation (default: fluid local, cla global)')
    parser.add_argument('--N', dest='sizes', default='20,50,100,200,500',
                        help='Population sizes (default: 20,50,100,200,500)')
    parser.add_argument('--runs', type=int, default=SSA_CONFIG['runs'],
                        help=f"SSA replications (default: {SSA_CONFIG['runs']})")
    parser.add_argument('--seed', type=int, default=SSA_CONFIG['seed'], help='Master seed')
    parser.add_argument('--grid-points', type=int, default=100,
                        help='Horizon grid size (default: 100)')
    parser.add_argument('--state', help='Initial agent state of local properties')
    parser.add_argument('--horizon', '-T', type=float, help='Horizon of a bare automaton')
    parser.add_argument('--random-params', type=int, default=0,
                        help='Number of random parameter sets (default: 0, use the model file)')
    parser.add_argument('--alpha', choices=sorted(ALPHA_RANGES),
                        help='Also draw the global lower threshold from this range')
    parser.add_argument('--no-correction', dest='correct', action='store_false',
                        help='Disable the finite-size correction')
    parser.add_argument('--output-dir', '-o', default=str(DATA_CONFIG['output_dir']),
                        help='Directory for the CSV/JSON tables')

    args = parser.parse_args()

    os.makedirs(DATA_CONFIG['logs_dir'], exist_ok=True)
    logging.config.dictConfig(LOGGING_CONFIG)

    properties = load_properties(args.property)
    prop = properties.get(args.name) if args.name else properties.main()
    reproducer = TableReproducer(args.model, prop, args.method, args.runs, args.seed,
                                 args.grid_points, args.state, args.horizon)
    sizes = [int(n) for n in args.sizes.split(',') if n.strip()]
    sets = sample_parameter_sets(args.random_params, args.seed, args.alpha) \
        if args.random_params else [{'params': None, 'alpha': None}]

    logger.info("=" * 60)
    logger.info(f"Error tables: {reproducer.mode} property, {reproducer.method} vs SSA({args.runs})")
    logger.info("=" * 60)

    rows = []
    for index, entry in enumerate(sets):
        for n in sizes:
            logger.info(f"[Set {index + 1}/{len(sets)}] N={n}")
            rows.append(reproducer.row(n, entry['params'], entry['alpha'], args.correct, index))

    df = pd.DataFrame(rows)
    summary = summarize(df)
    os.makedirs(args.output_dir, exist_ok=True)
    stem = f"tables_{reproducer.mode}_{reproducer.method}".replace('(', '').replace(')', '')
    df.to_csv(os.path.join(args.output_dir, f"{stem}_runs.csv"), index=False)
    summary.to_csv(os.path.join(args.output_dir, f"{stem}.csv"), index=False)
    with open(os.path.join(args.output_dir, f"{stem}.json"), 'w', encoding='utf-8') as handle:
        json.dump({'arguments': vars(args), 'summary': summary.to_dict(orient='records')},
                  handle, indent=2, default=str)

    logger.info("\n" + summary.to_string(index=False))
    return 0


if __name__ == "__main__":
    sys.exit(main())
