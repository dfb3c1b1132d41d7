'''
Quantile stage: innovation quantiles and the assembled quantile-specific
cost function

    Q(tau | v, t, i) = alpha0(tau, t) + alpha1(tau, t)'v
                       + 0.5 * alpha2(tau, t)'vquad(v) + mu_i(tau)

which equals location(v, t, i) + q_tau * scale(v, t, i).
'''
import logging
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from qcost.error import EstimationError, ValidationError
from qcost.panel.design import quad_expand, quad_matrix

logger = logging.getLogger(__name__)

MEAN_EFFECT = 'mean-effect'

QuantileCoefficients = namedtuple('QuantileCoefficients',
    ['alpha0', 'alpha1', 'alpha2', 'mu'])


def estimate_q_tau(residuals, scale_values, tau):
    '''
    Exact minimizer over q of sum rho_tau(u - z*q) for positive z.

    Because rho_tau is positively homogeneous, the objective equals
    sum z * rho_tau(u/z - q), whose minimizer is the weighted tau-quantile
    of the ratios u/z with weights z. Rows with z <= 0 are excluded; exact
    ties between candidate minimizers resolve to the smaller q.
    '''
    if not 0.0 < tau < 1.0:
        raise ValueError('tau must lie in (0, 1), got {}'.format(tau))
    u = np.asarray(residuals, dtype=np.float64)
    z = np.asarray(scale_values, dtype=np.float64)
    keep = z > 0
    if not keep.any():
        raise EstimationError('no observation with a positive scale value')
    excluded = int((~keep).sum())
    if excluded:
        logger.warning('excluding %d observations with non-positive scale from '
            'the quantile step', excluded)
    ratios = u[keep] / z[keep]
    weights = z[keep]
    order = np.argsort(ratios, kind='stable')
    cumulative = np.cumsum(weights[order])
    position = np.searchsorted(cumulative, tau * cumulative[-1], side='left')
    position = min(int(position), len(ratios) - 1)
    return float(ratios[order][position])


def quantile_coefficients(loc, sc, q_tau, t):
    '''Composite coefficients of the tau-quantile cost function at time t.'''
    T = len(loc.eta) + 1
    if not 1 <= t <= T:
        raise ValueError('time index must lie in 1..{}, got {}'.format(T, t))
    eta_t = loc.eta_full[t - 1]
    theta_t = sc.theta_full[t - 1]
    alpha0 = loc.beta0 + sc.gamma0 * q_tau + eta_t + theta_t * q_tau
    alpha1 = loc.beta1 + sc.gamma1 * q_tau + loc.beta1_star * eta_t + \
        sc.gamma1_star * theta_t * q_tau
    alpha2 = loc.beta2 + sc.gamma2 * q_tau + loc.beta2_star * eta_t + \
        sc.gamma2_star * theta_t * q_tau
    mu = loc.lambda_ + sc.sigma * q_tau
    return QuantileCoefficients(alpha0=float(alpha0), alpha1=alpha1, alpha2=alpha2, mu=mu)


@dataclass(frozen=True, eq=False)
class QuantileFit:
    tau: float
    q_tau: float
    location: object
    scale: object

    @property
    def regressors(self):
        return self.location.regressors

    @property
    def bank_ids(self):
        return self.location.bank_ids

    def coefficients(self, t):
        return quantile_coefficients(self.location, self.scale, self.q_tau, t)

    def bank_effects(self):
        return self.location.lambda_ + self.scale.sigma * self.q_tau

    def bank_effect(self, bank):
        if isinstance(bank, str) and bank == MEAN_EFFECT:
            return 0.0
        if isinstance(bank, (int, np.integer)):
            if not 0 <= bank < len(self.bank_ids):
                raise ValidationError('unknown bank index: {}'.format(bank), ids=[bank])
            return float(self.bank_effects()[bank])
        try:
            index = self.bank_ids.index(str(bank))
        except ValueError:
            raise ValidationError('unknown bank id: {}'.format(bank), ids=[bank])
        return float(self.bank_effects()[index])

    def predict_array(self, v, t, mu=0.0):
        '''Vectorized Q over rows of v with per-row time index and bank effect.'''
        return self.location.values(v, t) + self.q_tau * self.scale.values(v, t) + mu

    def gradient_array(self, v, t):
        '''d Q / d v per row: alpha1(t) + A(t) v with A rebuilt from alpha2(t).'''
        loc, sc, q = self.location, self.scale, self.q_tau
        v = np.atleast_2d(v)
        k = v.shape[1]
        eta_t = loc.eta_full[np.asarray(t) - 1].reshape(-1, 1)
        theta_q = (sc.theta_full[np.asarray(t) - 1] * q).reshape(-1, 1)
        base = quad_matrix(loc.beta2 + q * sc.gamma2, k)
        A_loc = quad_matrix(loc.beta2_star, k)
        A_sc = quad_matrix(sc.gamma2_star, k)
        alpha1 = loc.beta1 + q * sc.gamma1 + eta_t * loc.beta1_star + \
            theta_q * sc.gamma1_star
        return alpha1 + v @ base + eta_t * (v @ A_loc) + theta_q * (v @ A_sc)


def predict_quantile(fit, v, bank, t):
    '''
    Quantile of log cost at log regressors v, time index t and bank
    (id, index, or 'mean-effect' for a zero bank effect).
    '''
    coef = fit.coefficients(t)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (len(coef.alpha1),):
        raise ValueError('v must have length {}'.format(len(coef.alpha1)))
    return float(coef.alpha0 + coef.alpha1 @ v + 0.5 * coef.alpha2 @ quad_expand(v)
        + fit.bank_effect(bank))


def fit_quantiles(loc, sc, taus):
    '''QuantileFit per tau from fitted location and scale stages.'''
    return {float(tau): QuantileFit(tau=float(tau),
        q_tau=estimate_q_tau(loc.residuals, sc.scale_values, tau),
        location=loc, scale=sc) for tau in taus}
