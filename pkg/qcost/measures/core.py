'''
Shared pieces of the cost-function measures: result records, the
measure base class and the table builder that attaches bootstrap bounds
and inference categories.
'''
import logging
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from qcost.inference.intervals import LABELS, bc_intervals, classify_arrays
from qcost.panel.dataset import REGRESSORS

logger = logging.getLogger(__name__)

MeasureValues = namedtuple('MeasureValues', ['rows', 'estimate', 'flags', 'extras'])

SUMMARY_STATS = ('mean', 'q1', 'median', 'q3')
WEIGHT_COLUMNS = tuple('w_{}{}'.format(m, kappa) for m in (1, 2, 3) for kappa in 'ABC')


@dataclass
class MeasureResult:
    bank_id: str
    year: int
    tau: float
    measure: str
    estimate: float
    lower_1s: float = np.nan
    upper_1s: float = np.nan
    lower_2s: float = np.nan
    upper_2s: float = np.nan
    category: str = 'unclassified'
    category_2s: str = 'unclassified'
    argmin_weights: object = None
    admissible: bool = True
    flag: str = ''
    extras: dict = field(default_factory=dict)

    @property
    def bounds_2s(self):
        return (self.lower_2s, self.upper_2s)


def summary_statistics(estimates):
    '''Mean and quartiles of the finite entries.'''
    x = np.asarray(estimates, dtype=np.float64)
    x = x[np.isfinite(x)]
    if len(x) == 0:
        return np.full(len(SUMMARY_STATS), np.nan)
    q1, median, q3 = np.percentile(x, [25, 50, 75])
    return np.array([x.mean(), q1, median, q3])


class CostSurface:
    '''
    What the measures need from a fitted quantile cost function.
    `QuantileFit` satisfies it; fixtures subclass it to inject a known
    surface.
    '''
    tau = 0.5
    regressors = REGRESSORS

    def predict_array(self, v, t, mu=0.0):
        raise NotImplementedError

    def gradient_array(self, v, t):
        raise NotImplementedError

    def bank_effects(self):
        raise NotImplementedError


class FunctionSurface(CostSurface):
    '''
    Surface given by a vectorized `func(v, t)` of log regressors (rows) and
    time indices; bank effects default to zero. Gradients are central
    differences with step `step`.
    '''
    def __init__(self, func, tau=0.5, effects=None, regressors=REGRESSORS, step=1e-6):
        self.func = func
        self.tau = float(tau)
        self.effects = np.zeros(0) if effects is None else np.asarray(effects, dtype=np.float64)
        self.regressors = tuple(regressors)
        self.step = step

    def predict_array(self, v, t, mu=0.0):
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        t = np.broadcast_to(np.asarray(t), (v.shape[0],))
        return np.asarray(self.func(v, t), dtype=np.float64) + mu

    def gradient_array(self, v, t):
        v = np.atleast_2d(np.asarray(v, dtype=np.float64))
        grad = np.empty_like(v)
        for j in range(v.shape[1]):
            up, down = v.copy(), v.copy()
            up[:, j] += self.step
            down[:, j] -= self.step
            grad[:, j] = (self.predict_array(up, t) - self.predict_array(down, t)) / (2 * self.step)
        return grad

    def bank_effects(self):
        return self.effects


def bank_effect_rows(surface, group):
    '''Bank effect of each row; surfaces without effects give zeros.'''
    effects = np.asarray(surface.bank_effects(), dtype=np.float64)
    if len(effects) == 0:
        return np.zeros(len(group))
    return effects[np.asarray(group)]


class Measure:
    '''
    Base class. Subclasses set `kind` (scope, scale or tc), `name` (the
    value of the "measure" column) and implement `_evaluate_rows`.
    '''
    kind = None
    name = None

    @property
    def threshold(self):
        return LABELS[self.kind][0]

    def prepare(self, design):
        self.design = design
        return self

    def _require_design(self):
        if getattr(self, 'design', None) is None:
            raise RuntimeError('{} needs prepare(design) first'.format(type(self).__name__))
        return self.design

    def _evaluate_rows(self, fit, rows):
        raise NotImplementedError

    def rows(self):
        '''Observations the measure is defined on.'''
        return np.arange(self._require_design().N)

    def evaluate_all(self, fit):
        return self._evaluate_rows(fit, self.rows())

    def evaluate(self, fit, index):
        design = self._require_design()
        values = self._evaluate_rows(fit, np.array([index]))
        obs = design.observation(index)
        extras = {key: value[0] for key, value in values.extras.items()}
        weights = extras.pop('weights', None)
        return MeasureResult(bank_id=obs.bank_id, year=obs.year, tau=float(fit.tau),
            measure=self.name, estimate=float(values.estimate[0]),
            argmin_weights=weights, admissible=values.flags[0] == '',
            flag=values.flags[0], extras=extras)


def _estimates(measure, fit):
    values = measure.evaluate_all(fit)
    return np.where(values.flags == '', values.estimate, np.nan)


@dataclass
class MeasureReport:
    frame: pd.DataFrame
    replica_summaries: dict
    replica_values: dict = field(default_factory=dict)


def measure_frame(measure, fits, run=None, alpha=0.05, n_jobs=1):
    '''
    Evaluate `measure` for every observation and tau.

    Parameters
    ----------
    measure : Measure
        Prepared on the estimation design.
    fits : dict
        tau -> QuantileFit.
    run : BootstrapRun, optional
        Replica fits; when given, bias-corrected bounds and categories are
        attached and per-replica summary statistics are collected.

    Returns
    -------
    MeasureReport
    '''
    design = measure._require_design()
    frames = []
    replica_summaries = {}
    replica_values = {}
    for tau, fit in sorted(fits.items()):
        values = measure.evaluate_all(fit)
        rows = values.rows
        ok = values.flags == ''
        estimate = np.where(ok, values.estimate, np.nan)
        frame = pd.DataFrame({
            'bank_id': [design.bank_ids[g] for g in design.group[rows]],
            'year': design.row_years[rows].astype(np.int64),
            'tau': float(tau),
            'measure': measure.name,
            'estimate': estimate})
        n_rows = len(rows)
        bounds = {name: np.full(n_rows, np.nan)
            for name in ('lower_1s', 'upper_1s', 'lower_2s', 'upper_2s')}
        category = np.full(n_rows, 'unclassified', dtype=object)
        category_2s = np.full(n_rows, 'unclassified', dtype=object)
        if run is not None:
            replica_fits = run.quantile_fits(tau)
            logger.info('%s tau=%.2f: evaluating %d bootstrap replicas',
                measure.name, tau, len(replica_fits))
            replicas = np.vstack(Parallel(n_jobs=n_jobs)(
                delayed(_estimates)(measure, f) for f in replica_fits))
            replicas[:, ~ok] = np.nan
            intervals = bc_intervals(replicas, estimate, alpha)
            for name in bounds:
                bounds[name] = np.where(ok, intervals[name], np.nan)
            one, two = classify_arrays(estimate, intervals, measure.kind)
            category = np.where(ok, one, '')
            category_2s = np.where(ok, two, '')
            replica_summaries[float(tau)] = np.vstack(
                [summary_statistics(r[ok]) for r in replicas])
            replica_values[float(tau)] = replicas
        for name in ('lower_1s', 'lower_2s', 'upper_2s', 'upper_1s'):
            frame[name] = bounds[name]
        frame['category'] = np.where(ok, category, '')
        frame['category_2s'] = np.where(ok, category_2s, '')
        for key, value in values.extras.items():
            if key == 'weights':
                flat = value.reshape(n_rows, 9)
                for j, label in enumerate(WEIGHT_COLUMNS):
                    frame[label] = np.where(ok, flat[:, j], np.nan)
            else:
                frame[key] = np.where(ok, value, np.nan)
        frame['admissible'] = ok
        frame['flag'] = values.flags
        frames.append(frame)
    return MeasureReport(frame=pd.concat(frames, ignore_index=True),
        replica_summaries=replica_summaries, replica_values=replica_values)

