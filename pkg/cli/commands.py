import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from bvp.models import MultistartConfig, TargetSpec
from bvp.multistart import enumerate_minimizers
from cli.manifest import RunManifest
from cli.output import CsvTable, render
from cli.validators import (validate_epsilons, validate_horizon, validate_model_sources, validate_param,
                            validate_target)
from config.settings import (DEFAULT_EPSILONS, DEFAULT_EULER_STEPS, DEFAULT_HORIZON, DEFAULT_PATHS, DEFAULT_SEED,
                             DEFAULT_STEPS, LOG_LEVEL, MULTISTART_NORMAL, MULTISTART_SOBOL)
from expansion.expand import ExpansionOptions, expand, predicted_log_density, short_time
from hamiltonian.flow import path_to_csv
from model.builtins import build_builtin
from model.loader import load_system
from model.system import VectorFieldSystem
from montecarlo.report import McConfig, run_mc_validation
from nondegeneracy.report import assemble_nd_report
from utils.errors import NoAdmissibleControlError, SmallNoiseError
from utils.helpers import parse_float_list, write_csv
from utils.logger import setup_logger

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CERTIFIED = 2
EXIT_NO_CONTROL = 3

UNREPLAYED_FLAGS = ('--out', '--emit-plot-data')

Report = Dict[str, Any]


class UsageError(SmallNoiseError):
    pass


class CliParser(argparse.ArgumentParser):
    """Usage errors exit with 1 so that exit code 2 keeps its ND meaning"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog='smallnoise', description='Small-noise density expansions for projected diffusions')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=CliParser)

    common = CliParser(add_help=False)
    common.add_argument('--model', action='append', help='model document path or builtin:<name>')
    common.add_argument('--param', action='append', default=[], help='builtin parameter key=value (repeatable)')
    common.add_argument('--target', help='projected target a, comma separated')
    common.add_argument('--horizon', type=float, default=DEFAULT_HORIZON)
    common.add_argument('--multistart', type=int, default=MULTISTART_SOBOL + MULTISTART_NORMAL)
    common.add_argument('--seed', type=int, default=DEFAULT_SEED)
    common.add_argument('--steps', type=int, default=DEFAULT_STEPS)
    common.add_argument('--out')
    common.add_argument('--format', choices=['json', 'csv'], default='json')
    common.add_argument('--hessian-oracle', action='store_true')
    common.add_argument('--strict-nd', action='store_true')
    common.add_argument('--epsilons', default=','.join(str(e) for e in DEFAULT_EPSILONS))
    common.add_argument('--paths', type=int, default=DEFAULT_PATHS)
    common.add_argument('--euler-steps', type=int, default=DEFAULT_EULER_STEPS)
    common.add_argument('--radii', default='')
    common.add_argument('--reference', help='prior expand report supplying reference c1, c2')
    common.add_argument('--emit-plot-data')
    common.add_argument('--jobs', type=int)
    common.add_argument('--log-level', default=LOG_LEVEL)

    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    replay = sub.add_parser('replay', help='re-run the manifest embedded in a JSON report')
    replay.add_argument('report')
    replay.add_argument('--out')
    replay.add_argument('--log-level', default=LOG_LEVEL)
    return parser


def load_model(args) -> Tuple[VectorFieldSystem, str]:
    ok, source, message = validate_model_sources(args.model)
    if not ok:
        raise UsageError(message)
    params = {}
    for text in args.param:
        ok, pair, message = validate_param(text)
        if not ok:
            raise UsageError(message)
        params[pair[0]] = pair[1]
    if source.startswith('builtin:'):
        return build_builtin(source.split(':', 1)[1], params), source
    if params:
        raise UsageError("--param applies to builtin models only; put parameters in the model document")
    if not Path(source).exists():
        raise UsageError(f"model document {source} not found")
    return load_system(source), source


def resolve_target(args, system: VectorFieldSystem) -> TargetSpec:
    if args.target is None:
        raise UsageError("--target is required")
    ok, a, message = validate_target(args.target, system.l)
    if not ok:
        raise UsageError(message)
    ok, horizon, message = validate_horizon(args.horizon)
    if not ok:
        raise UsageError(message)
    return TargetSpec.create(system, a, horizon)


def multistart_config(args) -> MultistartConfig:
    if args.multistart < 1:
        raise UsageError("--multistart must be positive")
    n_sobol = args.multistart // 2
    return MultistartConfig(n_sobol=n_sobol, n_normal=args.multistart - n_sobol, seed=args.seed,
                            steps=args.steps, jobs=args.jobs)


def expansion_options(args) -> ExpansionOptions:
    return ExpansionOptions(multistart=multistart_config(args), strict_nd=args.strict_nd,
                            hessian=args.hessian_oracle)


def epsilons(args) -> List[float]:
    ok, values, message = validate_epsilons(args.epsilons)
    if not ok:
        raise UsageError(message)
    return values


# Commands

def cmd_minimize(args, system) -> Tuple[Report, CsvTable, int]:
    target = resolve_target(args, system)
    minimizer_set = enumerate_minimizers(system, target, multistart_config(args))
    if args.emit_plot_data:
        stem = Path(args.emit_plot_data)
        for k, solution in enumerate(minimizer_set.solutions):
            path_to_csv(solution.path, str(stem.with_name(f'{stem.stem}_solution{k}.csv')))
    report = {'minimizer_set': minimizer_set.to_dict(), 'coordinate_order': system.coordinate_order}
    minimal = set(map(id, minimizer_set.minimizers))
    header = (['index', 'energy', 'residual', 'is_minimizer'] + [f'p0_{k + 1}' for k in range(system.d)]
              + [f'q_T{k + 1}' for k in range(system.l)] + [f'z_T{k + 1}' for k in range(system.d - system.l)])
    rows = [[k, s.energy, s.residual, id(s) in minimal] + list(s.p0) + list(s.q_T) + list(s.z_T)
            for k, s in enumerate(minimizer_set.solutions)]
    return report, (header, rows), EXIT_OK


def cmd_check_nd(args, system) -> Tuple[Report, CsvTable, int]:
    target = resolve_target(args, system)
    minimizer_set = enumerate_minimizers(system, target, multistart_config(args))
    nd_report = assemble_nd_report(system, minimizer_set, hessian=args.hessian_oracle, jobs=args.jobs)
    report = {'nd_report': nd_report.to_dict(), 'energy': minimizer_set.energy,
              'multistart_stats': minimizer_set.multistart_stats}
    header = ['index', 'smallest_singular_value', 'invertible', 'nonfocality_det', 'hadamard_ratio',
              'focal_status', 'hessian_min_eig', 'verdict']
    rows = [[k, r.smallest_singular_value, r.invertible, r.nonfocality_det, r.hadamard_ratio, r.focal_status,
             r.hessian_min_eig, nd_report.verdict] for k, r in enumerate(nd_report.records)]
    code = EXIT_NOT_CERTIFIED if args.strict_nd and not nd_report.certified else EXIT_OK
    return report, (header, rows), code


def cmd_expand(args, system) -> Tuple[Report, CsvTable, int]:
    target = resolve_target(args, system)
    result = expand(system, target.a, target.T, expansion_options(args))
    return _expansion_outputs(args, result)


def cmd_short_time(args, system) -> Tuple[Report, CsvTable, int]:
    target = resolve_target(args, system)
    result = short_time(system, target.a, expansion_options(args))
    return _expansion_outputs(args, result)


def _expansion_outputs(args, result) -> Tuple[Report, CsvTable, int]:
    if args.emit_plot_data:
        write_csv(args.emit_plot_data, ['epsilon', 'predicted_log_density'],
                  predicted_log_density(result, epsilons(args)))
    header = ['index', 'energy', 'c2_contribution', 'c1', 'c2', 'l', 'verdict', 'certified'] + \
        [f'yhat_T{k + 1}' for k in range(result.l)]
    rows = [[k, entry['energy'], entry['c2_contribution'], result.c1, result.c2, result.l,
             result.nd_report.verdict, result.certified] + list(entry['yhat_T'])
            for k, entry in enumerate(result.per_minimizer)]
    code = EXIT_NOT_CERTIFIED if args.strict_nd and not result.certified else EXIT_OK
    return {'expansion': result.to_dict()}, (header, rows), code


def cmd_mc_validate(args, system) -> Tuple[Report, CsvTable, int]:
    target = resolve_target(args, system)
    reference = None
    if args.reference:
        with open(args.reference) as handle:
            prior = json.load(handle)['expansion']
        reference = {'c1': prior['c1'], 'c2': prior['c2']}
    config = McConfig(a=tuple(target.a), epsilons=tuple(epsilons(args)), n_paths=args.paths,
                      euler_steps=args.euler_steps, seed=args.seed, radii=tuple(parse_float_list(args.radii)),
                      T=target.T)
    report = run_mc_validation(system, config, reference, jobs=args.jobs)
    if args.emit_plot_data:
        write_csv(args.emit_plot_data, ['epsilon', 'g', 'fit'], report.plot_rows(system.l))
    header = ['epsilon', 'log_density', 'stderr', 'n_used', 'n_censored']
    rows = [[r['epsilon'], r['log_density'], r['stderr'], r['n_used'], r['n_censored']] for r in report.rows]
    return {'mc_report': report.to_dict()}, (header, rows), EXIT_OK if report.valid else EXIT_ERROR


COMMANDS: Dict[str, Callable] = {
    'minimize': cmd_minimize,
    'check-nd': cmd_check_nd,
    'expand': cmd_expand,
    'short-time': cmd_short_time,
    'mc-validate': cmd_mc_validate,
}


def replayable_argv(argv: List[str]) -> List[str]:
    kept, skip = [], False
    for token in argv:
        if skip:
            skip = False
            continue
        if token in UNREPLAYED_FLAGS:
            skip = True
            continue
        if any(token.startswith(flag + '=') for flag in UNREPLAYED_FLAGS):
            continue
        kept.append(token)
    return kept


def run(argv: Optional[List[str]] = None, stdout=None) -> int:
    """Parse, dispatch and emit; returns the process exit code"""
    argv = list(sys.argv[1:] if argv is None else argv)
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    setup_logger(args.log_level)

    if args.command == 'replay':
        with open(args.report) as handle:
            manifest = json.load(handle)['manifest']
        replayed = list(manifest['argv']) + (['--out', args.out] if args.out else [])
        logger.info(f"Replaying {' '.join(replayed)}")
        return run(replayed, stdout)

    options = {k: v for k, v in vars(args).items() if k not in ('out', 'emit_plot_data', 'log_level')}
    manifest = RunManifest.create(args.command, ','.join(args.model or []), options, args.seed,
                                  replayable_argv(argv))
    table = None
    try:
        system, _ = load_model(args)
        report, table, code = COMMANDS[args.command](args, system)
    except NoAdmissibleControlError as e:
        logger.error(f"No admissible control: {e}")
        report, code = {'error': 'no admissible control found', 'diagnostics': str(e)}, EXIT_NO_CONTROL
    except (SmallNoiseError, ValueError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        report, code = {'error': type(e).__name__, 'diagnostics': str(e)}, EXIT_ERROR

    report['manifest'] = manifest.to_dict()
    text = render(report, table, args.format)
    if args.out:
        with open(args.out, 'w') as handle:
            handle.write(text)
    else:
        stdout.write(text)
    return code

