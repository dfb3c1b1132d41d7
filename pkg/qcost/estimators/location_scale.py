'''
Location and scale stages of the panel location-scale quantile estimator.

Step 1 minimizes the profiled within-transformed SSE of log cost over the
time-index vector eta, then recovers the intercept, bank location effects
and residuals. Step 2 repeats the same machinery on the absolute Step-1
residuals, giving the scale function and its bank effects. Quantile
levels are handled in `qcost.estimators.quantile`.
'''
import logging
import warnings
from collections import namedtuple
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares, minimize

from qcost.error import ConvergenceError, ValidationError
from qcost.estimators.profile import WithinBlocks
from qcost.panel.design import quad_expand
from qcost.utils import assign_config

logger = logging.getLogger(__name__)

_StageFit = namedtuple('_StageFit',
    ['eta', 'betas', 'parts', 'objective', 'n_iter', 'grad_norm', 'start'])


class OptimizerConfig:
    '''
    Settings of the outer optimization over the time-index vector.

    ftol : relative objective tolerance of the quasi-Newton search
    gtol : projected-gradient tolerance of the quasi-Newton search
    xtol : parameter tolerance of the least-squares polish
    max_iter : iteration cap; hitting it is a convergence failure
    polish : run the variable-projection least-squares polish
    pinv_fallback : minimum-norm solution for a rank-deficient inner system
    tie_rtol : a later start must beat the incumbent by this relative margin
    '''
    def __init__(self, *args, **kwargs):
        self.ftol = 1e-10
        self.gtol = 1e-8
        self.xtol = 1e-8
        self.max_iter = 500
        self.polish = True
        self.pinv_fallback = False
        self.tie_rtol = 1e-12
        assign_config(self, kwargs)


def _stage_values(intercept, times, s1, s1_star, s2, s2_star, v, t, effects=None,
        group=None):
    '''Index value intercept + time + slopes (+ bank effect) per row.'''
    v = np.atleast_2d(v)
    vq = quad_expand(v)
    tau_t = np.r_[0.0, times][np.asarray(t) - 1]
    value = intercept + tau_t + v @ s1 + tau_t * (v @ s1_star) + \
        0.5 * (vq @ s2 + tau_t * (vq @ s2_star))
    if effects is not None:
        value = value + effects[group]
    return value


@dataclass(frozen=True, eq=False)
class LocationFit:
    beta0: float
    eta: np.ndarray
    beta1: np.ndarray
    beta1_star: np.ndarray
    beta2: np.ndarray
    beta2_star: np.ndarray
    lambda_: np.ndarray
    residuals: np.ndarray
    bank_ids: tuple
    years: tuple
    regressors: tuple
    converged: bool = True
    n_iter: int = 0
    objective: float = 0.0
    grad_norm: float = 0.0
    start: str = ''

    @property
    def eta_full(self):
        return np.r_[0.0, self.eta]

    def values(self, v, t, group=None):
        '''Location function; bank effects are added when `group` is given.'''
        return _stage_values(self.beta0, self.eta, self.beta1, self.beta1_star,
            self.beta2, self.beta2_star, v, t,
            effects=None if group is None else self.lambda_, group=group)


@dataclass(frozen=True, eq=False)
class ScaleFit:
    gamma0: float
    theta: np.ndarray
    gamma1: np.ndarray
    gamma1_star: np.ndarray
    gamma2: np.ndarray
    gamma2_star: np.ndarray
    sigma: np.ndarray
    scale_values: np.ndarray
    violations: tuple
    bank_ids: tuple
    years: tuple
    regressors: tuple
    converged: bool = True
    n_iter: int = 0
    objective: float = 0.0
    grad_norm: float = 0.0
    start: str = ''

    @property
    def theta_full(self):
        return np.r_[0.0, self.theta]

    @property
    def positivity_violations(self):
        return len(self.violations)

    def values(self, v, t, group=None):
        '''Scale function; bank effects are added when `group` is given.'''
        return _stage_values(self.gamma0, self.theta, self.gamma1, self.gamma1_star,
            self.gamma2, self.gamma2_star, v, t,
            effects=None if group is None else self.sigma, group=group)


def year_mean_start(design, y):
    '''Differences of year means of y relative to the first year.'''
    sums = np.bincount(design.t - 1, weights=y, minlength=design.T)
    counts = np.bincount(design.t - 1, minlength=design.T)
    means = sums / counts
    return means[1:] - means[0]


def _fit_stage(design, y, starts, config, blocks=None):
    blocks = blocks if blocks is not None else WithinBlocks(design)
    objective = blocks.objective(y, pinv_fallback=config.pinv_fallback)

    best = None
    capped = None
    for label, x0 in starts:
        res = minimize(objective, np.asarray(x0, dtype=np.float64), method='L-BFGS-B',
            jac='3-point', options={'ftol': config.ftol, 'gtol': config.gtol,
                'maxiter': config.max_iter})
        grad_norm = float(np.linalg.norm(res.jac)) if res.jac is not None else np.nan
        logger.debug('start %s: objective %.6g after %d iterations (%s)',
            label, res.fun, res.nit, res.message)
        candidate = (label, res.x, float(res.fun), int(res.nit), grad_norm)
        if res.nit >= config.max_iter and not res.success:
            if capped is None or candidate[2] < capped[2]:
                capped = candidate
            continue
        if best is None or candidate[2] < best[2] - config.tie_rtol * (1.0 + abs(best[2])):
            best = candidate
    if best is None:
        label, x, fun, nit, grad_norm = capped
        raise ConvergenceError(
            'time-index search did not converge in {} iterations (objective {:.6g}, '
            'gradient norm {:.3g})'.format(config.max_iter, fun, grad_norm),
            best_x=x, objective=fun, grad_norm=grad_norm)

    label, eta, _, nit, grad_norm = best
    sse, betas = objective.solve(eta)
    if config.polish and blocks.n_times > 0:
        res = least_squares(objective.residuals, eta, jac='3-point', method='trf',
            ftol=config.ftol, xtol=config.xtol, gtol=config.ftol,
            max_nfev=config.max_iter)
        polished_sse, polished_betas = objective.solve(res.x)
        if polished_sse <= sse:
            eta, sse, betas = res.x, polished_sse, polished_betas
            nit += int(res.nfev)
    parts = objective.decompose(eta, betas)
    logger.info('stage converged from %s start: objective %.8g, %d iterations',
        label, sse, nit)
    return _StageFit(eta=np.asarray(eta, dtype=np.float64), betas=betas, parts=parts,
        objective=sse, n_iter=nit, grad_norm=grad_norm, start=label)


def require_panel(design):
    if design.n < 2 or design.T < 2:
        raise ValidationError('need at least two banks and two years, got {} and {}'.format(
            design.n, design.T))


def estimate_location(design, optimizer_config=None, blocks=None, y=None):
    '''
    Step 1: location function of log cost.

    Parameters
    ----------
    design : TranslogDesign
    optimizer_config : OptimizerConfig, optional
    blocks : WithinBlocks, optional
        Precomputed blocks of `design`, reused across bootstrap replicas.
    y : array, optional
        Dependent variable replacing the design's log cost.

    Returns
    -------
    LocationFit
    '''
    config = optimizer_config if optimizer_config is not None else OptimizerConfig()
    require_panel(design)
    y = design.c if y is None else np.asarray(y, dtype=np.float64)
    starts = [('zero', np.zeros(design.T - 1)),
        ('year-means', year_mean_start(design, y))]
    stage = _fit_stage(design, y, starts, config, blocks=blocks)
    b = stage.betas
    return LocationFit(beta0=stage.parts.intercept, eta=stage.eta,
        beta1=b.beta1, beta1_star=b.beta1_star, beta2=b.beta2, beta2_star=b.beta2_star,
        lambda_=stage.parts.effects, residuals=stage.parts.residuals,
        bank_ids=design.bank_ids, years=design.years, regressors=design.regressors,
        converged=True, n_iter=stage.n_iter, objective=stage.objective,
        grad_norm=stage.grad_norm, start=stage.start)


def estimate_scale(design, residuals, optimizer_config=None, init=None, blocks=None):
    '''
    Step 2: scale function from the absolute Step-1 residuals.

    `init` is the starting time-index vector (normally the Step-1 eta);
    the zero vector is always tried as well. Observations whose fitted
    scale is not positive are recorded in `violations`.
    '''
    config = optimizer_config if optimizer_config is not None else OptimizerConfig()
    y = np.abs(np.asarray(residuals, dtype=np.float64))
    starts = []
    if init is not None:
        starts.append(('location', np.asarray(init, dtype=np.float64)))
    starts.append(('zero', np.zeros(design.T - 1)))
    stage = _fit_stage(design, y, starts, config, blocks=blocks)
    b = stage.betas
    scale_values = stage.parts.fitted
    violations = tuple(np.flatnonzero(scale_values <= 0).tolist())
    if len(violations) > 0.001 * design.N:
        message = '{} of {} observations have a non-positive fitted scale'.format(
            len(violations), design.N)
        logger.warning(message)
        warnings.warn(message, RuntimeWarning)
    return ScaleFit(gamma0=stage.parts.intercept, theta=stage.eta,
        gamma1=b.beta1, gamma1_star=b.beta1_star, gamma2=b.beta2, gamma2_star=b.beta2_star,
        sigma=stage.parts.effects, scale_values=scale_values, violations=violations,
        bank_ids=design.bank_ids, years=design.years, regressors=design.regressors,
        converged=True, n_iter=stage.n_iter, objective=stage.objective,
        grad_norm=stage.grad_norm, start=stage.start)


def with_residuals(fit, residuals):
    return replace(fit, residuals=np.asarray(residuals, dtype=np.float64))
