'''
Run configuration: defaults, a YAML key-value file and command-line
overrides, in increasing order of precedence.
'''
import logging
import os

import yaml

from qcost.error import ConfigError
from qcost.inference.bootstrap import RESIDUAL_SOURCES
from qcost.measures.scope import grid_units
from qcost.panel.dataset import DEFAULT_SCHEMA, OUTPUTS, REGRESSORS
from qcost.utils import assign_config

logger = logging.getLogger(__name__)


class RunConfig:
    '''
    Settings of one qcost run.

    input: panel CSV path
    schema: canonical name -> CSV column
    taus: quantile levels, strictly inside (0, 1)
    B: bootstrap replicas; 0 skips the bootstrap
    alpha: level of the bias-corrected bounds
    grid_step: weight increment of the subadditivity lattice
    seed: master seed of the bootstrap and the dominance test
    output_dir: where artifacts and tables are written
    normalize_prices: divide cost and prices by W3
    residual_source: 'original' or 'bootstrap' replica residuals
    dump_replicas: also write replica-level measure values
    failure_tolerance: largest share of failed bootstrap replicas
    n_jobs: joblib workers
    regressors: subset of the canonical regressors, must hold Y1..Y3
    max_subsamples, n_sizes: dominance subsampling settings
    pinv_fallback: minimum-norm inner solution on rank deficiency
    '''
    def __init__(self, *args, **kwargs):
        self.input = None
        self.schema = dict(DEFAULT_SCHEMA)
        self.taus = [0.10, 0.25, 0.50, 0.75, 0.90]
        self.B = 500
        self.alpha = 0.05
        self.grid_step = 0.1
        self.seed = 0
        self.output_dir = 'qcost-out'
        self.normalize_prices = False
        self.residual_source = 'original'
        self.dump_replicas = False
        self.failure_tolerance = 0.05
        self.n_jobs = 1
        self.regressors = list(REGRESSORS)
        self.max_subsamples = 1000
        self.n_sizes = 199
        self.pinv_fallback = False
        assign_config(self, kwargs)

    def check(self):
        '''Validate and normalize every setting; raises ConfigError.'''
        try:
            taus = [float(t) for t in self.taus]
        except (TypeError, ValueError):
            raise ConfigError('taus must be numbers, got {!r}'.format(self.taus))
        bad = [t for t in taus if not 0.0 < t < 1.0]
        if bad:
            raise ConfigError('taus must lie strictly inside (0, 1): {}'.format(bad))
        if len(set(taus)) != len(taus):
            raise ConfigError('taus must be distinct')
        if not taus:
            raise ConfigError('taus must not be empty')
        self.taus = sorted(taus)
        if self.B < 0:
            raise ConfigError('B must be non-negative, got {}'.format(self.B))
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError('alpha must lie in (0, 1), got {}'.format(self.alpha))
        grid_units(self.grid_step)
        if self.residual_source not in RESIDUAL_SOURCES:
            raise ConfigError('residual_source must be one of {}, got {!r}'.format(
                ', '.join(RESIDUAL_SOURCES), self.residual_source))
        if not 0.0 <= self.failure_tolerance < 1.0:
            raise ConfigError('failure_tolerance must lie in [0, 1)')
        if self.n_jobs == 0:
            raise ConfigError('n_jobs must be nonzero')
        if self.max_subsamples < 1 or self.n_sizes < 1:
            raise ConfigError('max_subsamples and n_sizes must be positive')
        unknown = [r for r in self.regressors if r not in REGRESSORS]
        if unknown:
            raise ConfigError('unknown regressors: {}'.format(', '.join(unknown)))
        if not set(OUTPUTS) <= set(self.regressors):
            raise ConfigError('regressors must include Y1, Y2 and Y3')
        if not isinstance(self.schema, dict):
            raise ConfigError('schema must be a mapping of canonical names to columns')
        return self

    def to_dict(self):
        return {key: value for key, value in vars(self).items() if not key.startswith('_')}

    def path(self, *parts):
        return os.path.join(self.output_dir, *parts)


def load_config(path=None, overrides=None):
    '''
    RunConfig from an optional YAML mapping file and override dict;
    overrides whose value is None are ignored.
    '''
    settings = {}
    if path is not None:
        if not os.path.isfile(path):
            raise ConfigError('config file not found: {}'.format(path))
        with open(path, encoding='utf-8') as handle:
            try:
                loaded = yaml.safe_load(handle)
            except yaml.YAMLError as exc:
                raise ConfigError('{} is not valid YAML: {}'.format(path, exc))
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError('{} must hold a key-value mapping'.format(path))
        settings.update(loaded)
    settings.update({key: value for key, value in (overrides or {}).items()
        if value is not None})
    config = RunConfig(config=settings)
    logger.debug('run configuration: %s', config.to_dict())
    return config.check()
