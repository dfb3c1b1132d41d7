'''
qcost command line: estimate, scope, scale, tc, dominance, simulate and
report. Exit codes: 0 ok, 1 computational failure, 2 usage or input error.
'''
import argparse
import json
import logging
import os
import sys

import numpy as np
import pandas as pd

from qcost.config import load_config
from qcost.error import USAGE_ERRORS, ArtifactError, Error, UsageError, ValidationError
from qcost.estimators import (LocationScaleEstimator, WithinBlocks, check_compatible,
    load_fit, save_fit)
from qcost.inference import (BootstrapRun, bootstrap_pipeline, dominance_matrix,
    fingerprint, samples_from_frame)
from qcost.measures.core import measure_frame
from qcost.panel import build_design, load_panel
from qcost.report import summary_table, write_report, write_table
from qcost.simulation import DgpSpec, simulate_panel
from qcost.utils import create_measure, save_npz
from qcost.version import VERSION

logger = logging.getLogger(__name__)

FIT_FILE = 'fit.json'
BOOTSTRAP_FILE = 'bootstrap.npz'
PANEL_FILE = 'panel.csv'
TRUTH_FILE = 'truth.json'


class ArgumentParser(argparse.ArgumentParser):
    '''Argument errors become UsageError so they share the one-line format.'''

    def error(self, message):
        raise UsageError(message)


def _float_list(text):
    try:
        return [float(x) for x in text.split(',') if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError('expected comma-separated numbers, got {!r}'.format(text))


def _name_list(text):
    return [x.strip() for x in text.split(',') if x.strip()]


def _add_common(parser):
    parser.add_argument('--config', help='YAML file of run settings')
    parser.add_argument('--input', help='panel CSV')
    parser.add_argument('--output-dir', dest='output_dir')
    parser.add_argument('--taus', type=_float_list, help='e.g. 0.1,0.25,0.5,0.75,0.9')
    parser.add_argument('--B', type=int, help='bootstrap replicas (0 = none)')
    parser.add_argument('--alpha', type=float)
    parser.add_argument('--grid-step', dest='grid_step', type=float)
    parser.add_argument('--seed', type=int)
    parser.add_argument('--n-jobs', dest='n_jobs', type=int)
    parser.add_argument('--regressors', type=_name_list)
    parser.add_argument('--residual-source', dest='residual_source',
        choices=['original', 'bootstrap'])
    parser.add_argument('--normalize-prices', dest='normalize_prices', action='store_true',
        default=None)
    parser.add_argument('--dump-replicas', dest='dump_replicas', action='store_true',
        default=None)
    parser.add_argument('--pinv-fallback', dest='pinv_fallback', action='store_true',
        default=None)
    parser.add_argument('--max-subsamples', dest='max_subsamples', type=int)
    parser.add_argument('--n-sizes', dest='n_sizes', type=int)
    parser.add_argument('-v', '--verbose', action='store_true')
    parser.add_argument('--progress', action='store_true', help='show bootstrap progress')


_SETTINGS = ('input', 'output_dir', 'taus', 'B', 'alpha', 'grid_step', 'seed', 'n_jobs',
    'regressors', 'residual_source', 'normalize_prices', 'dump_replicas', 'pinv_fallback',
    'max_subsamples', 'n_sizes')


def build_parser():
    parser = ArgumentParser(prog='qcost',
        description='Panel quantile cost functions: scope, scale and technical change.')
    parser.add_argument('--version', action='version', version='qcost ' + VERSION)
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True
    for name, help_text in (
            ('estimate', 'fit the location-scale quantile cost function'),
            ('scope', 'cost subadditivity S* with bootstrap bounds'),
            ('scale', 'returns to scale with bootstrap bounds'),
            ('tc', 'technical change with bootstrap bounds'),
            ('dominance', 'stochastic dominance p-values across taus'),
            ('simulate', 'write a synthetic panel and its ground truth'),
            ('report', 'plot-data files from the scope results')):
        sub = commands.add_parser(name, help=help_text)
        _add_common(sub)
        if name == 'estimate':
            sub.add_argument('--truth', help='ground-truth JSON for recovery diagnostics')
        if name == 'simulate':
            sub.add_argument('--n', type=int, default=100, help='banks')
            sub.add_argument('--T', type=int, default=5, help='years')
            sub.add_argument('--innovation', default='normal',
                choices=['normal', 'lognormal', 'degenerate'])
    return parser


def _configure(args):
    overrides = {key: getattr(args, key, None) for key in _SETTINGS}
    return load_config(args.config, overrides)


def _load_design(config):
    if config.input is None:
        raise UsageError('no input panel; pass --input or set input in the config file')
    data = load_panel(config.input, config.schema)
    if len(data.rejections):
        os.makedirs(config.output_dir, exist_ok=True)
        data.write_rejections(config.path('rejections.csv'))
        logger.warning('%d input rows rejected; see %s', len(data.rejections),
            config.path('rejections.csv'))
    return build_design(data, regressors=config.regressors,
        normalize_prices=config.normalize_prices)


def _estimator(config):
    return LocationScaleEstimator(taus=list(config.taus), pinv_fallback=config.pinv_fallback)


def _print_convergence(fit):
    for label, stage in (('location', fit.location), ('scale', fit.scale)):
        print('{:<9} objective {:.10g}  iterations {:d}  start {}'.format(
            label, stage.objective, stage.n_iter, stage.start))
    print('scale positivity violations: {}'.format(fit.scale.positivity_violations))
    for tau, q in sorted(fit.quantiles.items()):
        print('tau {:.2f}  q_tau {:.6g}'.format(tau, q.q_tau))


def _print_recovery(fit, truth):
    for stage, names in (('location', ('eta', 'beta1', 'beta1_star', 'beta2', 'beta2_star')),
            ('scale', ('theta', 'gamma1', 'gamma1_star', 'gamma2', 'gamma2_star'))):
        for name in names:
            estimate = getattr(getattr(fit, stage), name)
            true = getattr(getattr(truth, stage), name)
            if np.shape(estimate) != np.shape(true):
                continue
            print('recovery {:<12} max abs error {:.3g}'.format(
                name, float(np.max(np.abs(estimate - true))) if np.size(true) else 0.0))


def cmd_estimate(config, args):
    design = _load_design(config)
    fit = _estimator(config).fit(design)
    os.makedirs(config.output_dir, exist_ok=True)
    save_fit(config.path(FIT_FILE), fit, design, config.normalize_prices)
    _print_convergence(fit)
    if getattr(args, 'truth', None):
        _print_recovery(fit, load_fit(args.truth))
    return fit


def _load_estimates(config, design):
    fit = load_fit(config.path(FIT_FILE))
    check_compatible(fit, design)
    missing = [tau for tau in config.taus if float(tau) not in fit.quantiles]
    if missing:
        raise ArtifactError('fit artifact lacks taus {}; re-run `qcost estimate`'.format(
            missing))
    return fit


def _bootstrap(config, design, fit, progress=False):
    if config.B == 0:
        return None
    path = config.path(BOOTSTRAP_FILE)
    if os.path.isfile(path):
        run = BootstrapRun.load(path)
        if run.matches(config.B, config.seed, config.taus, config.residual_source,
                fingerprint(design, fit.location, fit.scale)):
            logger.info('reusing bootstrap replicas from %s', path)
            return run
        logger.info('%s was drawn for other settings or data; re-running', path)
    estimator = _estimator(config)
    run = bootstrap_pipeline(design, fit.location, fit.scale, config.taus, B=config.B,
        seed=config.seed, optimizer_config=estimator.optimizer_config,
        residual_source=config.residual_source, n_jobs=config.n_jobs,
        failure_tolerance=config.failure_tolerance, progress=progress,
        blocks=WithinBlocks(design))
    run.save(path)
    return run


def cmd_measures(config, which, progress=False):
    design = _load_design(config)
    fit = _load_estimates(config, design)
    run = _bootstrap(config, design, fit, progress=progress)
    settings = {'grid_step': config.grid_step, 'n_jobs': config.n_jobs} \
        if which == 'scope' else {}
    measure = create_measure(which, **settings).prepare(design)
    fits = {float(tau): fit.quantiles[float(tau)] for tau in config.taus}
    report = measure_frame(measure, fits, run=run, alpha=config.alpha, n_jobs=config.n_jobs)
    os.makedirs(config.output_dir, exist_ok=True)
    write_table(report.frame, config.path('{}_results.csv'.format(which)))
    summary = summary_table(report.frame, measure.kind,
        report.replica_summaries if run is not None else None, config.alpha)
    write_table(summary, config.path('{}_summary.csv'.format(which)))
    if config.dump_replicas and report.replica_values:
        first = report.frame[report.frame['tau'] == float(config.taus[0])]
        save_npz(config.path('{}_replicas.npz'.format(which)),
            bank_id=first['bank_id'].to_numpy(dtype=str), year=first['year'].to_numpy(),
            **{'tau_{:.2f}'.format(tau): values
                for tau, values in report.replica_values.items()})
    print(summary.to_string(index=False))
    return report


def _read_results(config, which):
    path = config.path('{}_results.csv'.format(which))
    if not os.path.isfile(path):
        raise ArtifactError('{} not found; run `qcost {}` first'.format(path, which))
    return pd.read_csv(path, dtype={'bank_id': str})


def cmd_dominance(config):
    frame = _read_results(config, 'scope')
    samples = samples_from_frame(frame)
    if len(samples) < 2:
        raise ValidationError('dominance needs scope results at two or more taus')
    matrix = dominance_matrix(samples, seed=config.seed, n_sizes=config.n_sizes,
        max_subsamples=config.max_subsamples, n_jobs=config.n_jobs)
    matrix.to_csv(config.path('dominance.csv'))
    print(matrix.to_string())
    return matrix


def cmd_simulate(config, args):
    spec = DgpSpec(n=args.n, T=args.T, seed=config.seed, innovation=args.innovation,
        regressors=list(config.regressors))
    simulation = simulate_panel(spec)
    os.makedirs(config.output_dir, exist_ok=True)
    simulation.data.frame.to_csv(config.path(PANEL_FILE), index=False, float_format='%.17g')
    with open(config.path(TRUTH_FILE), 'w', encoding='utf-8') as handle:
        json.dump(simulation.truth.to_dict(simulation.design, taus=config.taus), handle,
            indent=1)
        handle.write('\n')
    print('wrote {} and {}'.format(config.path(PANEL_FILE), config.path(TRUTH_FILE)))
    return simulation


def cmd_report(config):
    frame = _read_results(config, 'scope')
    design = _load_design(config)
    paths = write_report(config.path('report'), frame, design)
    for path in paths:
        print(path)
    return paths


def run(args):
    config = _configure(args)
    if args.command == 'estimate':
        cmd_estimate(config, args)
    elif args.command in ('scope', 'scale', 'tc'):
        cmd_measures(config, args.command, progress=args.progress)
    elif args.command == 'dominance':
        cmd_dominance(config)
    elif args.command == 'simulate':
        cmd_simulate(config, args)
    elif args.command == 'report':
        cmd_report(config)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
            format='%(levelname)s %(name)s: %(message)s')
        run(args)
    except USAGE_ERRORS as exc:
        print('qcost: {}: {}'.format(exc.reason, exc), file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print('qcost: file-not-found: {}'.format(exc), file=sys.stderr)
        return 2
    except Error as exc:
        print('qcost: {}: {}'.format(exc.reason, exc), file=sys.stderr)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())
