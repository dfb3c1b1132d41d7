'''
Synthetic bank panels from a known location-scale cost model

    c_it = location(v_it, t, i) + scale(v_it, t, i) * eps_it,

with E[eps] = 0 and E|eps| = 1, and the ground truth needed to check the
estimators against it.
'''
import logging
from collections import namedtuple
from dataclasses import replace
from functools import lru_cache

import numpy as np
import pandas as pd
from scipy import integrate
from scipy import stats as ss

from qcost.error import ConfigError, DgpError
from qcost.estimators.estimator import LocationScaleFit
from qcost.estimators.location_scale import LocationFit, ScaleFit
from qcost.estimators.quantile import QuantileFit
from qcost.estimators.serialize import fit_to_dict
from qcost.panel.dataset import NUMERIC, REGRESSORS, PanelDataset
from qcost.panel.design import build_design
from qcost.utils import assign_config, np_random

logger = logging.getLogger(__name__)

INNOVATIONS = ('normal', 'lognormal', 'degenerate')

_NORMAL_ABS_MEAN = np.sqrt(2.0 / np.pi)
_MAX_RESAMPLES = 100

Simulation = namedtuple('Simulation', ['data', 'design', 'truth'])


@lru_cache(maxsize=16)
def _lognormal_moments(shape):
    '''Mean and mean absolute deviation of exp(shape * Z).'''
    mean = np.exp(shape ** 2 / 2)
    density = ss.lognorm(s=shape).pdf
    mad, _ = integrate.quad(lambda x: abs(x - mean) * density(x), 0, np.inf, limit=200)
    return mean, mad


def draw_innovations(kind, rng, size, shape=0.5):
    '''Innovations with mean zero and mean absolute value one.'''
    if kind == 'normal':
        return rng.standard_normal(size) / _NORMAL_ABS_MEAN
    if kind == 'lognormal':
        mean, mad = _lognormal_moments(shape)
        return (np.exp(shape * rng.standard_normal(size)) - mean) / mad
    if kind == 'degenerate':
        return np.zeros(size)
    raise ValueError('unknown innovation law: {}'.format(kind))


def innovation_quantile(kind, tau, shape=0.5):
    '''tau-quantile of the innovation law.'''
    if kind == 'normal':
        return float(ss.norm.ppf(tau) / _NORMAL_ABS_MEAN)
    if kind == 'lognormal':
        mean, mad = _lognormal_moments(shape)
        return float((np.exp(shape * ss.norm.ppf(tau)) - mean) / mad)
    if kind == 'degenerate':
        return 0.0
    raise ValueError('unknown innovation law: {}'.format(kind))


class DgpSpec:
    '''
    Location-scale data generating process for an n x T bank panel.

    Coefficient vectors follow the estimator layout: slopes of length k,
    quadratic coefficients of length k(k+1)/2 on the doubled-off-diagonal
    expansion, time indices of length T-1 (the first period is zero).
    Vectors left as None get the defaults built in `_complete`.
    '''
    def __init__(self, *args, **kwargs):
        self.n = 100
        self.T = 5
        self.seed = 0
        self.regressors = list(REGRESSORS)
        self.innovation = 'normal'
        self.innovation_shape = 0.5     # lognormal log-sd
        self.beta0 = 1.0
        self.eta = None                 # default: -2% per year
        self.beta1 = None
        self.beta1_star = None
        self.beta2 = None
        self.beta2_star = None
        self.gamma0 = 0.1
        self.theta = None               # default: zeros
        self.gamma1 = None
        self.gamma1_star = None
        self.gamma2 = None
        self.gamma2_star = None
        self.lambda_sd = 0.2            # sd of bank location effects
        self.sigma_sd = 0.02            # sd of bank scale effects
        self.v_mean = None              # mean log regressors
        self.centered = False           # default v_mean of zero instead of bank-sized levels
        self.v_sd = None
        self.correlation = 0.3          # common-factor share of regressor variance
        self.bank_share = 0.5           # share of regressor variance fixed per bank
        assign_config(self, kwargs)
        self._complete()

    def _complete(self):
        if self.n < 2 or self.T < 2:
            raise ConfigError('need at least two banks and two years, got n={} T={}'.format(
                self.n, self.T))
        k = len(self.regressors)
        p = k * (k + 1) // 2
        defaults = {
            'eta': -0.02 * np.arange(1, self.T),
            'theta': np.zeros(self.T - 1),
            'beta1': _default_slopes(self.regressors),
            'beta1_star': np.zeros(k),
            'beta2': np.zeros(p),
            'beta2_star': np.zeros(p),
            'gamma1': np.zeros(k),
            'gamma1_star': np.zeros(k),
            'gamma2': np.zeros(p),
            'gamma2_star': np.zeros(p),
            'v_mean': np.zeros(k) if self.centered else _default_means(self.regressors),
            'v_sd': np.where(np.isin(self.regressors, ('W1', 'W2', 'W3')), 0.3, 1.0),
        }
        sizes = {'eta': self.T - 1, 'theta': self.T - 1, 'v_mean': k, 'v_sd': k,
            'beta1': k, 'beta1_star': k, 'gamma1': k, 'gamma1_star': k,
            'beta2': p, 'beta2_star': p, 'gamma2': p, 'gamma2_star': p}
        for name, default in defaults.items():
            value = getattr(self, name)
            value = default if value is None else np.asarray(value, dtype=np.float64)
            if value.shape != (sizes[name],):
                raise ConfigError('{} must have length {}, got {}'.format(name, sizes[name],
                    value.shape))
            setattr(self, name, value)
        if self.innovation not in INNOVATIONS:
            raise ConfigError('innovation must be one of {}'.format(INNOVATIONS))
        if not (0 <= self.correlation < 1 and 0 <= self.bank_share < 1):
            raise ConfigError('correlation and bank_share must lie in [0, 1)')

    @property
    def k(self):
        return len(self.regressors)

    def stages(self, bank_ids, years, lambda_=None, sigma=None):
        '''True location and scale stages as fit objects.'''
        n = len(bank_ids)
        meta = dict(bank_ids=tuple(bank_ids), years=tuple(years),
            regressors=tuple(self.regressors))
        loc = LocationFit(beta0=float(self.beta0), eta=self.eta, beta1=self.beta1,
            beta1_star=self.beta1_star, beta2=self.beta2, beta2_star=self.beta2_star,
            lambda_=np.zeros(n) if lambda_ is None else lambda_,
            residuals=np.empty(0), start='truth', **meta)
        sc = ScaleFit(gamma0=float(self.gamma0), theta=self.theta, gamma1=self.gamma1,
            gamma1_star=self.gamma1_star, gamma2=self.gamma2, gamma2_star=self.gamma2_star,
            sigma=np.zeros(n) if sigma is None else sigma, scale_values=np.empty(0),
            violations=(), start='truth', **meta)
        return loc, sc

    def q_tau(self, tau):
        return innovation_quantile(self.innovation, tau, self.innovation_shape)


def _default_slopes(regressors):
    slopes = {'Y1': 0.35, 'Y2': 0.25, 'Y3': 0.15, 'W1': 0.3, 'W2': 0.3, 'W3': 0.4,
        'K1': 0.05, 'K2': -0.02, 'K3': 0.02}
    return np.array([slopes[name] for name in regressors])


def _default_means(regressors):
    means = {'Y1': 7.0, 'Y2': 6.5, 'Y3': 5.0, 'W1': -3.0, 'W2': -4.0, 'W3': -3.5,
        'K1': 5.5, 'K2': 6.0, 'K3': 3.0}
    return np.array([means[name] for name in regressors])


class GroundTruth:
    '''True stages, bank effects and innovation law of a simulated panel.'''

    def __init__(self, spec, location, scale, innovations):
        self.spec = spec
        self.location = location
        self.scale = scale
        self.innovations = innovations

    def q_tau(self, tau):
        return self.spec.q_tau(tau)

    def quantile_fit(self, tau):
        return QuantileFit(tau=float(tau), q_tau=self.q_tau(tau), location=self.location,
            scale=self.scale)

    def to_dict(self, design=None, taus=(0.10, 0.25, 0.50, 0.75, 0.90)):
        '''Fit-artifact document of the true model plus the DGP settings.'''
        fit = LocationScaleFit(location=self.location, scale=self.scale,
            quantiles={float(t): self.quantile_fit(t) for t in taus})
        doc = fit_to_dict(fit, design=design)
        doc['dgp'] = {'n': int(self.spec.n), 'T': int(self.spec.T),
            'seed': int(self.spec.seed), 'innovation': self.spec.innovation,
            'innovation_shape': float(self.spec.innovation_shape),
            'lambda_sd': float(self.spec.lambda_sd), 'sigma_sd': float(self.spec.sigma_sd),
            'correlation': float(self.spec.correlation)}
        return doc


def _draw_regressors(spec, rng, n_rows, bank_part):
    k = spec.k
    common = rng.standard_normal((n_rows, 1))
    own = rng.standard_normal((n_rows, k))
    z = np.sqrt(spec.correlation) * common + np.sqrt(1 - spec.correlation) * own
    z = np.sqrt(spec.bank_share) * bank_part + np.sqrt(1 - spec.bank_share) * z
    return spec.v_mean + spec.v_sd * z


def simulate_panel(spec):
    '''
    Draw a balanced panel from `spec`.

    Bank effects are recentered to sum to zero. Rows whose scale would not
    be positive get fresh regressors; more than half of the rows failing on
    the first draw is a DgpError.

    Returns
    -------
    Simulation(data, design, truth)
    '''
    rng = np_random(spec.seed)
    n, T, k = spec.n, spec.T, spec.k
    N = n * T
    bank_ids = tuple('b{:04d}'.format(i + 1) for i in range(n))
    years = tuple(range(2001, 2001 + T))
    group = np.repeat(np.arange(n), T)
    t = np.tile(np.arange(1, T + 1), n)

    lambda_ = rng.normal(0.0, spec.lambda_sd, n)
    lambda_ -= lambda_.mean()
    sigma = rng.normal(0.0, spec.sigma_sd, n)
    sigma -= sigma.mean()
    loc, sc = spec.stages(bank_ids, years, lambda_=lambda_, sigma=sigma)

    bank_part = rng.standard_normal((n, k))[group]
    v = _draw_regressors(spec, rng, N, bank_part)
    scale = sc.values(v, t, group)
    bad = scale <= 0
    if bad.mean() > 0.5:
        raise DgpError('{:.0%} of draws violate scale positivity'.format(bad.mean()))
    attempts = 0
    while bad.any():
        attempts += 1
        if attempts > _MAX_RESAMPLES:
            raise DgpError('could not draw regressors with a positive scale for '
                '{} observations'.format(int(bad.sum())))
        v[bad] = _draw_regressors(spec, rng, int(bad.sum()), bank_part[bad])
        scale[bad] = sc.values(v[bad], t[bad], group[bad])
        bad = scale <= 0
    if attempts:
        logger.info('redrew regressors %d times for scale positivity', attempts)

    eps = draw_innovations(spec.innovation, rng, N, spec.innovation_shape)
    u = scale * eps
    c = loc.values(v, t, group) + u

    frame = pd.DataFrame({'bank_id': np.asarray(bank_ids)[group],
        'year': np.asarray(years)[t - 1]})
    levels = dict(zip(spec.regressors, np.exp(v).T))
    for name in NUMERIC[1:]:
        frame[name] = levels.get(name, np.ones(N))
    frame.insert(2, 'C', np.exp(c))
    data = PanelDataset.from_frame(frame)
    design = build_design(data, regressors=spec.regressors)

    loc = replace(loc, residuals=u)
    sc = replace(sc, scale_values=scale)
    truth = GroundTruth(spec, loc, sc, eps)
    logger.info('simulated %d banks x %d years (%s innovations)', n, T, spec.innovation)
    return Simulation(data=data, design=design, truth=truth)
