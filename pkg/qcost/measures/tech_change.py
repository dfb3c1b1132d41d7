'''
Discrete dual technical change: the downward shift of the cost quantile
between t-1 and t at fixed regressors and bank effect,

    TC = -[Q(v, t) - Q(v, t-1)],

split into a neutral part (time index shifts alone) and a non-neutral
part (time index shifts acting through the starred slopes).
'''
import logging
from collections import namedtuple

import numpy as np

from qcost.error import ValidationError
from qcost.measures.core import Measure, MeasureResult, MeasureValues
from qcost.panel.design import quad_expand
from qcost.utils import assign_config

logger = logging.getLogger(__name__)

TechChange = namedtuple('TechChange', ['total', 'neutral', 'non_neutral'])


def _decompose(fit, v, t):
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    t = np.asarray(t)
    total = -(fit.predict_array(v, t) - fit.predict_array(v, t - 1))
    loc = getattr(fit, 'location', None)
    sc = getattr(fit, 'scale', None)
    if loc is None or sc is None:
        nan = np.full(len(total), np.nan)
        return TechChange(total=total, neutral=nan, non_neutral=nan)
    vq = quad_expand(v)
    d_eta = loc.eta_full[t - 1] - loc.eta_full[t - 2]
    d_theta_q = (sc.theta_full[t - 1] - sc.theta_full[t - 2]) * fit.q_tau
    neutral = -(d_eta + d_theta_q)
    non_neutral = -(d_eta * (v @ loc.beta1_star + 0.5 * vq @ loc.beta2_star)
        + d_theta_q * (v @ sc.gamma1_star + 0.5 * vq @ sc.gamma2_star))
    return TechChange(total=total, neutral=neutral, non_neutral=non_neutral)


def tech_change(fit, obs):
    '''
    Technical change of one observation (t >= 2). For a QuantileFit the
    neutral and non-neutral parts are reported in `extras`; they add up to
    the estimate.
    '''
    if obs.t < 2:
        raise ValidationError('technical change needs a prior period; {} in {} is the '
            'first year'.format(obs.bank_id, obs.year), ids=[obs.bank_id])
    parts = _decompose(fit, obs.v, np.array([obs.t]))
    return MeasureResult(bank_id=obs.bank_id, year=obs.year, tau=float(fit.tau),
        measure=TechChangeMeasure.name, estimate=float(parts.total[0]),
        extras={'neutral': float(parts.neutral[0]),
            'non_neutral': float(parts.non_neutral[0])})


class TechChangeMeasure(Measure):
    '''Technical change; defined for observations after the first year.'''
    kind = 'tc'
    name = 'TC'

    def __init__(self, *args, **kwargs):
        assign_config(self, kwargs)

    def rows(self):
        return np.flatnonzero(self._require_design().t >= 2)

    def _evaluate_rows(self, fit, rows):
        design = self._require_design()
        t = design.t[rows]
        flags = np.where(t >= 2, '', 'first period').astype(object)
        later = t >= 2
        total = np.full(len(rows), np.nan)
        neutral = np.full(len(rows), np.nan)
        non_neutral = np.full(len(rows), np.nan)
        if later.any():
            parts = _decompose(fit, design.v[rows[later]], t[later])
            total[later] = parts.total
            neutral[later] = parts.neutral
            non_neutral[later] = parts.non_neutral
        return MeasureValues(rows=rows, estimate=total, flags=flags,
            extras={'neutral': neutral, 'non_neutral': non_neutral})
