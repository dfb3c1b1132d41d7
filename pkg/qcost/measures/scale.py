'''
Returns to scale with quasi-fixed equity:

    R = (1 - dQ/d ln K1) / sum_m dQ/d ln Y_m

R > 1 is increasing returns.
'''
import logging

import numpy as np

from qcost.measures.core import Measure, MeasureResult, MeasureValues
from qcost.panel.dataset import OUTPUTS
from qcost.utils import assign_config

logger = logging.getLogger(__name__)

ILL_SIGNED = 'ill-signed output elasticities'


def quantile_gradient(fit, v, t):
    '''Derivative of the log-cost quantile with respect to the log regressors.'''
    return fit.gradient_array(np.asarray(v, dtype=np.float64)[None, :], np.array([t]))[0]


def _rts(gradient, output_columns, equity_column):
    gradient = np.atleast_2d(gradient)
    denominator = gradient[:, list(output_columns)].sum(axis=1)
    equity = gradient[:, equity_column] if equity_column is not None else 0.0
    ok = denominator > 0
    with np.errstate(divide='ignore', invalid='ignore'):
        R = np.where(ok, (1.0 - equity) / np.where(ok, denominator, 1.0), np.nan)
    flags = np.where(ok, '', ILL_SIGNED).astype(object)
    return R, flags


def _columns(regressors):
    regressors = tuple(regressors)
    equity = regressors.index('K1') if 'K1' in regressors else None
    return [regressors.index(name) for name in OUTPUTS], equity


def returns_to_scale(fit, obs):
    '''
    Returns to scale of one observation. Without a K1 regressor the equity
    elasticity is zero. A non-positive sum of output elasticities gives a
    NaN estimate flagged "ill-signed output elasticities".
    '''
    outputs, equity = _columns(fit.regressors)
    R, flags = _rts(quantile_gradient(fit, obs.v, obs.t), outputs, equity)
    return MeasureResult(bank_id=obs.bank_id, year=obs.year, tau=float(fit.tau),
        measure=ReturnsToScaleMeasure.name, estimate=float(R[0]),
        admissible=flags[0] == '', flag=flags[0])


class ReturnsToScaleMeasure(Measure):
    kind = 'scale'
    name = 'R'

    def __init__(self, *args, **kwargs):
        assign_config(self, kwargs)

    def _evaluate_rows(self, fit, rows):
        design = self._require_design()
        outputs, equity = _columns(design.regressors)
        R, flags = _rts(fit.gradient_array(design.v[rows], design.t[rows]), outputs, equity)
        n_bad = int((flags != '').sum())
        if n_bad:
            logger.info('tau=%.2f: %d observations with ill-signed output elasticities',
                fit.tau, n_bad)
        return MeasureValues(rows=rows, estimate=R, flags=flags, extras={})
