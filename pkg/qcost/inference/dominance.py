'''
Generalized Kolmogorov-Smirnov first-order dominance test across the
cost-quantile-specific distributions of a measure, with p-values from
subsampling contiguous blocks of the (shared) observation index.
'''
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from numpy.lib.stride_tricks import sliding_window_view

from qcost.error import ValidationError
from qcost.utils import np_random

logger = logging.getLogger(__name__)

# cells of one subsample batch (starts x pooled sample size)
_BATCH_CELLS = 4_000_000


@dataclass(frozen=True, eq=False)
class DominanceProblem:
    '''
    target_tau : quantile level whose distribution is the hypothesized
        dominant one
    comparison_taus : levels compared against target_tau
    samples : tau -> vector of estimates, aligned by observation
    '''
    target_tau: float
    comparison_taus: tuple
    samples: dict

    def __post_init__(self):
        comparison = tuple(float(t) for t in self.comparison_taus)
        if not comparison:
            raise ValidationError('comparison set is empty')
        if float(self.target_tau) in comparison:
            raise ValidationError('comparison set must exclude the target tau')
        missing = [t for t in (float(self.target_tau),) + comparison
            if t not in self.samples]
        if missing:
            raise ValidationError('no sample for tau: {}'.format(missing))
        lengths = {len(self.samples[t]) for t in (float(self.target_tau),) + comparison}
        if len(lengths) != 1:
            raise ValidationError('samples are not aligned: lengths {}'.format(sorted(lengths)))
        object.__setattr__(self, 'target_tau', float(self.target_tau))
        object.__setattr__(self, 'comparison_taus', comparison)

    @property
    def N(self):
        return len(self.samples[self.target_tau])

    @property
    def target(self):
        return np.asarray(self.samples[self.target_tau], dtype=np.float64)

    @property
    def comparisons(self):
        return [np.asarray(self.samples[t], dtype=np.float64) for t in self.comparison_taus]


def sup_cdf_difference(a, b):
    '''
    sup over the pooled values of F_a(s) - F_b(s), row by row.

    a, b : arrays (S, n) of equally sized samples; 1-d input is one row.
    The empirical-CDF difference only jumps at sample values, so the sup
    is attained after the last of a run of tied values.
    '''
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    n = a.shape[1]
    values = np.concatenate([a, b], axis=1)
    steps = np.concatenate([np.full(a.shape, 1.0 / n), np.full(b.shape, -1.0 / n)], axis=1)
    order = np.argsort(values, axis=1, kind='stable')
    values = np.take_along_axis(values, order, axis=1)
    path = np.cumsum(np.take_along_axis(steps, order, axis=1), axis=1)
    last_of_run = np.ones(values.shape, dtype=bool)
    last_of_run[:, :-1] = values[:, 1:] != values[:, :-1]
    path = np.where(last_of_run, path, -np.inf)
    return np.maximum(path.max(axis=1), 0.0)


def _min_sup_swapped(target, comparisons):
    return np.min(np.vstack([sup_cdf_difference(target, c) for c in comparisons]), axis=0)


def ks_statistic(problem, scaled=False):
    '''
    min over comparison taus of sup_s [F_tau(s) - F_target(s)]; multiplied
    by sqrt(N) when `scaled`.
    '''
    target = problem.target
    d = float(min(sup_cdf_difference(c, target)[0] for c in problem.comparisons))
    return np.sqrt(problem.N) * d if scaled else d


@dataclass(frozen=True)
class SdTestResult:
    statistic: float
    p_value: float
    sizes: np.ndarray
    p_values: np.ndarray
    n_subsamples: np.ndarray


def subsample_sizes(N, n_sizes=199):
    '''
    Equidistant subsample sizes between max(floor(log log N), 2) and
    floor(N / log log N).
    '''
    if N < 20:
        raise ValidationError('sample too small for subsampling grid (N={})'.format(N))
    loglog = np.log(np.log(N))
    lower = max(int(np.floor(loglog)), 2)
    upper = int(np.floor(N / loglog))
    if upper < lower:
        raise ValidationError('sample too small for subsampling grid (N={})'.format(N))
    return np.floor(np.linspace(lower, upper, n_sizes)).astype(np.int64)


def _size_p_value(target, comparisons, b, starts, statistic):
    '''Share of subsample statistics at size b reaching the full-sample one.'''
    batch = max(1, _BATCH_CELLS // (2 * b))
    stats = []
    target_windows = sliding_window_view(target, b)
    comparison_windows = [sliding_window_view(c, b) for c in comparisons]
    for lo in range(0, len(starts), batch):
        chunk = starts[lo:lo + batch]
        stats.append(np.sqrt(b) * _min_sup_swapped(target_windows[chunk],
            [w[chunk] for w in comparison_windows]))
    stats = np.concatenate(stats)
    return float(np.mean(stats >= statistic - 1e-12))


def subsampling_test(problem, seed=0, n_sizes=199, max_subsamples=1000, n_jobs=1):
    '''
    Subsampling test of the null that the target distribution first-order
    dominates at least one comparison distribution.

    The statistic sqrt(N) * min_tau sup[F_target - F_tau] is compared with
    its subsample counterparts at each of `n_sizes` sizes; at most
    `max_subsamples` contiguous blocks are drawn per size, all taus moved
    together. The reported p-value is the mean of the per-size p-values.

    Returns
    -------
    SdTestResult
    '''
    N = problem.N
    sizes = subsample_sizes(N, n_sizes)
    target = problem.target
    comparisons = problem.comparisons
    statistic = float(np.sqrt(N) * _min_sup_swapped(target, comparisons)[0])

    all_starts = []
    for j, b in enumerate(sizes):
        n_starts = N - b + 1
        if n_starts > max_subsamples:
            starts = np.sort(np_random(seed, j).choice(n_starts, max_subsamples,
                replace=False))
        else:
            starts = np.arange(n_starts)
        all_starts.append(starts)

    p_values = np.array(Parallel(n_jobs=n_jobs)(
        delayed(_size_p_value)(target, comparisons, int(b), starts, statistic)
        for b, starts in zip(sizes, all_starts)))
    p_value = float(p_values.mean())
    logger.info('dominance test tau=%.2f vs %s: statistic %.4f, p-value %.4f',
        problem.target_tau, ','.join('{:.2f}'.format(t) for t in problem.comparison_taus),
        statistic, p_value)
    return SdTestResult(statistic=statistic, p_value=p_value, sizes=sizes,
        p_values=p_values, n_subsamples=np.array([len(s) for s in all_starts]))


def sd_test(problem, seed=0, n_sizes=199, max_subsamples=1000, n_jobs=1):
    '''Subsampling p-value of the dominance null; see `subsampling_test`.'''
    return subsampling_test(problem, seed=seed, n_sizes=n_sizes,
        max_subsamples=max_subsamples, n_jobs=n_jobs).p_value


def samples_from_frame(frame, column='estimate'):
    '''
    tau -> estimates aligned on (bank_id, year), from a long measure table.
    Observations missing in any tau are dropped.
    '''
    wide = frame.pivot_table(index=['bank_id', 'year'], columns='tau', values=column,
        aggfunc='first', dropna=False)
    complete = wide.dropna(how='any')
    dropped = len(wide) - len(complete)
    if dropped:
        logger.info('dropping %d observations without an estimate at every tau', dropped)
    return {float(tau): complete[tau].to_numpy(dtype=np.float64) for tau in complete.columns}


def _set_label(taus):
    return ','.join('{:.2f}'.format(t) for t in taus)


def dominance_matrix(samples, seed=0, n_sizes=199, max_subsamples=1000, n_jobs=1):
    '''
    p-value matrix: one row per target tau (all but the lowest, highest
    first) and one column per cumulative set of lower taus, nearest first.

    Parameters
    ----------
    samples : dict
        tau -> aligned estimates; rows with a NaN at any tau are dropped.

    Returns
    -------
    pandas.DataFrame indexed by target tau
    '''
    taus = sorted(float(t) for t in samples)
    if len(taus) < 2:
        raise ValidationError('dominance needs estimates at two or more taus')
    stacked = np.column_stack([np.asarray(samples[t], dtype=np.float64) for t in taus])
    keep = np.isfinite(stacked).all(axis=1)
    if not keep.all():
        logger.info('dropping %d observations with a missing estimate', int((~keep).sum()))
    aligned = {t: stacked[keep, j] for j, t in enumerate(taus)}

    cells = {}
    labels = []
    for i in range(len(taus) - 1, 0, -1):
        target = taus[i]
        lower = taus[:i][::-1]
        for m in range(1, len(lower) + 1):
            comparison = tuple(lower[:m])
            label = _set_label(comparison)
            if label not in labels:
                labels.append(label)
            problem = DominanceProblem(target_tau=target, comparison_taus=comparison,
                samples=aligned)
            cells[(target, label)] = sd_test(problem, seed=seed, n_sizes=n_sizes,
                max_subsamples=max_subsamples, n_jobs=n_jobs)
    rows = [taus[i] for i in range(len(taus) - 1, 0, -1)]
    matrix = pd.DataFrame(np.nan, index=pd.Index(rows, name='target_tau'), columns=labels)
    for (target, label), p in cells.items():
        matrix.loc[target, label] = p
    return matrix
