'''
Bias-corrected percentile bootstrap intervals and the inference
categories built on them.
'''
import logging
import warnings
from collections import namedtuple
from dataclasses import dataclass

import numpy as np
from scipy import stats as ss

logger = logging.getLogger(__name__)

# threshold, (one-sided positive, negative), (two-sided contains, excludes)
LABELS = {
    'scope': (0.0, ('scope economies', 'no scope economies'),
        ('scope invariance', 'scope non-invariance')),
    'scale': (1.0, ('IRS', 'non-IRS'), ('CRS', 'non-CRS')),
    'tc': (0.0, ('technical progress', 'non-progress'),
        ('technical stasis', 'non-stasis')),
}

Category = namedtuple('Category', ['one_sided', 'two_sided'])


@dataclass(frozen=True)
class BcInterval:
    point: float
    z0: float
    alpha: float
    lower_1s: float
    upper_1s: float
    lower_2s: float
    upper_2s: float
    degenerate: bool = False

    @property
    def bounds_2s(self):
        return (self.lower_2s, self.upper_2s)


def _nearest_rank(sorted_replicas, p, B):
    '''Nearest-rank percentile: element ceil(p*B) of the sorted replicas.'''
    level = np.where(np.isfinite(p), p, 0.0)
    rank = np.ceil(np.round(level * B, 9)).astype(np.int64)
    rank = np.clip(rank, 1, np.maximum(B, 1)) - 1
    return np.take_along_axis(sorted_replicas, rank[None, :], axis=0)[0]


def bc_intervals(replicas, points, alpha=0.05):
    '''
    Column-wise bias-corrected percentile bounds.

    Parameters
    ----------
    replicas : array (B, M)
        Bootstrap values per estimand; NaN entries are ignored.
    points : array (M,)
        Point estimates.
    alpha : float
        One-sided bounds use alpha, two-sided bounds alpha/2 per tail.

    Returns
    -------
    dict of arrays: z0, lower_1s, upper_1s, lower_2s, upper_2s, degenerate
    '''
    R = np.asarray(replicas, dtype=np.float64)
    if R.ndim == 1:
        R = R[:, None]
    if R.shape[0] == 0:
        R = np.full((1, R.shape[1]), np.nan)
    points = np.broadcast_to(np.asarray(points, dtype=np.float64), R.shape[1:])
    valid = np.isfinite(R)
    B = valid.sum(axis=0)
    with np.errstate(invalid='ignore'):
        less = ((R < points) & valid).sum(axis=0)
        equal = ((R == points) & valid).sum(axis=0)
    count = less + 0.5 * equal

    low = count <= 0
    high = count >= B
    saturated = (low | high) & (B > 0) & np.isfinite(points)
    if saturated.any():
        logger.warning('median-bias count saturated for %d estimand(s); '
            'using 0.5 or B-0.5', int(saturated.sum()))
    count = np.where(low, 0.5, np.where(high, B - 0.5, count))
    with np.errstate(divide='ignore', invalid='ignore'):
        z0 = ss.norm.ppf(count / B)

    S = np.sort(R, axis=0)
    lo = np.take_along_axis(S, np.zeros((1, S.shape[1]), dtype=np.int64), axis=0)[0]
    hi = np.take_along_axis(S, np.maximum(B - 1, 0)[None, :], axis=0)[0]
    degenerate = (B > 0) & (lo == hi)
    if degenerate.any():
        message = '{} estimand(s) have identical replicas; interval collapses ' \
            'to a point'.format(int(degenerate.sum()))
        logger.warning(message)
        warnings.warn(message, RuntimeWarning)
    z0 = np.where(degenerate, 0.0, z0)

    out = {'z0': z0, 'degenerate': degenerate}
    for name, p in (('lower_2s', alpha / 2), ('upper_2s', 1 - alpha / 2),
            ('lower_1s', alpha), ('upper_1s', 1 - alpha)):
        level = ss.norm.cdf(2 * z0 + ss.norm.ppf(p))
        out[name] = np.where(B > 0, _nearest_rank(S, level, B), np.nan)
    missing = (B == 0) | ~np.isfinite(points)
    for name in ('z0', 'lower_2s', 'upper_2s', 'lower_1s', 'upper_1s'):
        out[name] = np.where(missing, np.nan, out[name])
    return out


def bc_interval(replicas, point, alpha=0.05, sided='both'):
    '''
    Bias-corrected percentile interval for one estimand.

    `sided` selects which bounds are filled: 'one', 'two' or 'both'.
    '''
    if sided not in ('one', 'two', 'both'):
        raise ValueError("sided must be 'one', 'two' or 'both', got {}".format(sided))
    out = bc_intervals(np.asarray(replicas, dtype=np.float64).reshape(-1, 1),
        np.array([point]), alpha)
    bounds = {name: float(out[name][0])
        for name in ('lower_1s', 'upper_1s', 'lower_2s', 'upper_2s')}
    if sided == 'one':
        bounds['lower_2s'] = bounds['upper_2s'] = np.nan
    elif sided == 'two':
        bounds['lower_1s'] = bounds['upper_1s'] = np.nan
    return BcInterval(point=float(point), z0=float(out['z0'][0]), alpha=alpha,
        degenerate=bool(out['degenerate'][0]), **bounds)


def classify(point, bounds, measure_kind):
    '''
    One-sided test: lower bound above the threshold (0 for scope and tc,
    1 for scale). Two-sided test: interval contains the threshold.
    '''
    threshold, positive, contains = LABELS[measure_kind]
    if isinstance(bounds, dict):
        lower_1s, lower_2s, upper_2s = bounds['lower_1s'], bounds['lower_2s'], bounds['upper_2s']
    else:
        lower_1s, lower_2s, upper_2s = bounds.lower_1s, bounds.lower_2s, bounds.upper_2s
    one = 'unclassified'
    two = 'unclassified'
    if np.isfinite(point) and np.isfinite(lower_1s):
        one = positive[0] if lower_1s > threshold else positive[1]
    if np.isfinite(point) and np.isfinite(lower_2s) and np.isfinite(upper_2s):
        two = contains[0] if lower_2s <= threshold <= upper_2s else contains[1]
    return Category(one_sided=one, two_sided=two)


def classify_arrays(points, intervals, measure_kind):
    threshold, positive, contains = LABELS[measure_kind]
    points = np.asarray(points, dtype=np.float64)
    lower_1s = intervals['lower_1s']
    lower_2s, upper_2s = intervals['lower_2s'], intervals['upper_2s']
    one = np.where(lower_1s > threshold, positive[0], positive[1]).astype(object)
    two = np.where((lower_2s <= threshold) & (threshold <= upper_2s),
        contains[0], contains[1]).astype(object)
    one[~(np.isfinite(points) & np.isfinite(lower_1s))] = 'unclassified'
    two[~(np.isfinite(points) & np.isfinite(lower_2s) & np.isfinite(upper_2s))] = 'unclassified'
    return one, two
