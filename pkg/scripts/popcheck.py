"""
Command-line entry point of the Population Model Checker

Verbs:
  fluid         mean/variance trajectories        CSV: t, X_<var>..., Var_<var>...
  check-local   CSL-TA signals and curves         CSV: t0, p_<state>...
  check-global  verdict tree of a global property JSON only
  simulate      one SSA trajectory (+ estimates)  CSV: t, <var>..., fired
  sweep         estimate vs N or vs T             CSV: N, method, T, estimate, corrected, seconds

Every run also writes a JSON document embedding the resolved configuration.
Exit codes: 0 done, 1 usage/parse error, 2 numerical failure, 3 warnings under --strict.
"""
import argparse
import logging
import logging.config
import os
import sys

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from pydantic import ValidationError

from config.settings import (COLLECTIVE_CONFIG, CURVE_CONFIG, DATA_CONFIG, LOGGING_CONFIG,
                             SOLVER_CONFIG, SSA_CONFIG, WORKER_CONFIG)
from src.runner.config import RunConfig
from src.runner.pipeline import EXIT_USAGE, VerificationPipeline

logger = logging.getLogger('popcheck')


def _param(text: str):
    name, sep, value = text.partition('=')
    if not sep:
        raise argparse.ArgumentTypeError(f"expected name=value, got '{text}'")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter value '{value}' is not a number") from None


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog='popcheck',
        description='Model checking of individual and collective properties of population models',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split('\n', 2)[2],
    )
    parser.add_argument(
        'verb',
        choices=['fluid', 'check-local', 'check-global', 'simulate', 'sweep'],
        help='What to compute'
    )
    parser.add_argument(
        'model',
        help='Population model file (.pop)'
    )
    parser.add_argument(
        'property', nargs='?', default=None,
        help='Property file (.prop)'
    )
    parser.add_argument(
        '--name',
        help='Property to check (default: the last "check" statement)'
    )
    parser.add_argument(
        '--method', '-m',
        default=None,
        help='fluid | cla | moments:m | maxent:m | ssa | exact (default depends on the verb)'
    )
    parser.add_argument(
        '--N', dest='n', type=int,
        help='Override the population size'
    )
    parser.add_argument(
        '--param', '-p', type=_param, action='append', default=[],
        help='Override a model parameter (name=value); repeatable'
    )
    parser.add_argument(
        '--horizon', '-T', type=float,
        help='Time horizon for fluid/simulate or for a bare automaton'
    )
    parser.add_argument(
        '--t0-max', type=float, default=0.0,
        help='Last evaluation time of local properties (default: 0)'
    )
    parser.add_argument(
        '--grid-points', type=int, default=CURVE_CONFIG['grid_points'],
        help=f"Curve and trajectory grid size (default: {CURVE_CONFIG['grid_points']})"
    )
    parser.add_argument(
        '--state',
        help='Initial agent state for local estimates'
    )
    parser.add_argument(
        '--runs', type=int, default=SSA_CONFIG['runs'],
        help=f"SSA replications (default: {SSA_CONFIG['runs']})"
    )
    parser.add_argument(
        '--seed', type=int, default=SSA_CONFIG['seed'],
        help=f"Master seed (default: {SSA_CONFIG['seed']})"
    )
    parser.add_argument(
        '--no-correction', dest='correct', action='store_false',
        default=COLLECTIVE_CONFIG['finite_size_correction'],
        help='Disable the finite-size threshold correction'
    )
    parser.add_argument(
        '--over',
        help='Sweep axis and values, e.g. N=20,50,100 or T=100,200,300'
    )
    parser.add_argument(
        '--rtol', type=float, default=SOLVER_CONFIG['rtol'],
        help=f"ODE relative tolerance (default: {SOLVER_CONFIG['rtol']})"
    )
    parser.add_argument(
        '--atol', type=float, default=SOLVER_CONFIG['atol'],
        help=f"ODE absolute tolerance (default: {SOLVER_CONFIG['atol']})"
    )
    parser.add_argument(
        '--workers', '-j', type=int, default=WORKER_CONFIG['workers'],
        help='Worker processes for sweeps and independent atoms (env POPCHECK_WORKERS)'
    )
    parser.add_argument(
        '--output-dir', '-o', default=str(DATA_CONFIG['output_dir']),
        help='Directory for CSV/JSON artifacts'
    )
    parser.add_argument('--csv', dest='csv_path', help='Explicit CSV output path')
    parser.add_argument('--json', dest='json_path', help='Explicit JSON output path')
    parser.add_argument(
        '--dump-product', action='store_true',
        help='Also write the product population model as JSON'
    )
    parser.add_argument(
        '--strict', action='store_true',
        help='Exit with status 3 when warnings were raised'
    )
    parser.add_argument(
        '--quiet', '-q', action='store_true',
        help='Only log warnings and errors; no progress bars'
    )
    return parser


DEFAULT_METHODS = {
    'fluid': 'fluid',
    'check-local': 'fluid',
    'check-global': 'cla',
    'simulate': 'ssa',
    'sweep': 'cla',
}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        verb=args.verb,
        model_path=args.model,
        property_path=args.property,
        property_name=args.name,
        method=args.method or DEFAULT_METHODS[args.verb],
        n=args.n,
        params=dict(args.param),
        horizon=args.horizon,
        t0_max=args.t0_max,
        grid_points=args.grid_points,
        state=args.state,
        runs=args.runs,
        seed=args.seed,
        correct=args.correct,
        over=args.over,
        rtol=args.rtol,
        atol=args.atol,
        workers=args.workers,
        output_dir=args.output_dir,
        csv_path=args.csv_path,
        json_path=args.json_path,
        dump_product=args.dump_product,
        strict=args.strict,
        quiet=args.quiet,
    )


def main(argv=None) -> int:
    """Run one verb."""
    args = build_parser().parse_args(argv)

    os.makedirs(DATA_CONFIG['logs_dir'], exist_ok=True)
    logging.config.dictConfig(LOGGING_CONFIG)
    if args.quiet:
        for handler in logging.getLogger().handlers:
            if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
                handler.setLevel(logging.WARNING)

    for path in (args.model, args.property):
        if path is not None and not os.path.isfile(path):
            logger.error(f"File not found: {path}")
            return EXIT_USAGE
    try:
        cfg = config_from_args(args)
    except ValidationError as e:
        for error in e.errors():
            where = '.'.join(str(p) for p in error['loc']) or 'config'
            logger.error(f"Invalid option {where}: {error['msg']}")
        return EXIT_USAGE

    return VerificationPipeline(cfg).run()


if __name__ == "__main__":
    sys.exit(main())
