'''
Translog design: log regressors, their quadratic expansion, time dummies
and the bank index, in bank_id/year order.
'''
from collections import namedtuple
from dataclasses import dataclass, replace

import numpy as np

from qcost.error import ConfigError, ValidationError
from qcost.panel.dataset import OUTPUTS, REGRESSORS

Observation = namedtuple('Observation',
    ['index', 'bank_id', 'year', 't', 'group', 'v', 'outputs'])


def quad_index(k):
    '''Row/column indices of the upper triangle of a k x k matrix, row-major.'''
    return np.triu_indices(k)


def quad_expand(v):
    '''
    Unique entries of vec(v v') with off-diagonal products doubled, so that
    0.5 * coef @ quad_expand(v) reproduces 0.5 * v' A v for the symmetric A
    built by `quad_matrix(coef)`.
    '''
    v = np.asarray(v, dtype=np.float64)
    k = v.shape[-1]
    rows, cols = quad_index(k)
    weights = np.where(rows == cols, 1.0, 2.0)
    return v[..., rows] * v[..., cols] * weights


def quad_matrix(coef, k):
    rows, cols = quad_index(k)
    A = np.zeros(np.shape(coef)[:-1] + (k, k))
    A[..., rows, cols] = coef
    A[..., cols, rows] = coef
    return A


def quad_names(names):
    rows, cols = quad_index(len(names))
    return tuple('{}*{}'.format(names[i], names[j]) for i, j in zip(rows, cols))


def _group_sums(values, codes, n_groups):
    order = np.argsort(codes, kind='stable')
    sorted_codes = codes[order]
    starts = np.flatnonzero(np.r_[True, sorted_codes[1:] != sorted_codes[:-1]])
    sums = np.zeros((n_groups,) + values.shape[1:])
    sums[sorted_codes[starts]] = np.add.reduceat(values[order], starts, axis=0)
    return sums


def group_means(values, group):
    '''Per-group means broadcast back to the observations.'''
    values = np.asarray(values, dtype=np.float64)
    _, codes, counts = np.unique(group, return_inverse=True, return_counts=True)
    codes = codes.reshape(-1)
    sums = _group_sums(values, codes, len(counts))
    means = sums / counts.reshape((-1,) + (1,) * (values.ndim - 1))
    return means[codes]


def within_transform(values, group):
    '''
    Subtract each bank's own mean from its observations.

    Works column-wise on 2-d input. Every group needs at least two
    observations.
    '''
    values = np.asarray(values, dtype=np.float64)
    labels, counts = np.unique(group, return_counts=True)
    if (counts < 2).any():
        raise ValidationError(
            'within transformation needs two observations per bank; '
            'singleton groups: {}'.format(
                ', '.join(str(g) for g in labels[counts < 2])),
            ids=labels[counts < 2].tolist())
    return values - group_means(values, group)


@dataclass(frozen=True, eq=False)
class TranslogDesign:
    '''
    v : (N, k) log regressors
    vquad : (N, k(k+1)/2) quadratic expansion of v
    D : (N, T-1) time dummies for t = 2..T
    group : (N,) bank index 0..n-1
    t : (N,) time index 1..T
    c : (N,) log cost
    outputs : (N, 3) output levels Y1..Y3, used by counterfactuals
    '''
    v: np.ndarray
    vquad: np.ndarray
    D: np.ndarray
    group: np.ndarray
    t: np.ndarray
    c: np.ndarray
    outputs: np.ndarray
    bank_ids: tuple
    years: tuple
    regressors: tuple
    normalized: bool = False

    @property
    def N(self):
        return self.v.shape[0]

    @property
    def n(self):
        return len(self.bank_ids)

    @property
    def T(self):
        return len(self.years)

    @property
    def k(self):
        return self.v.shape[1]

    @property
    def quad_names(self):
        return quad_names(self.regressors)

    @property
    def output_columns(self):
        return [self.regressors.index(name) for name in OUTPUTS]

    @property
    def row_years(self):
        return np.asarray(self.years)[self.t - 1]

    def regressor_index(self, name):
        try:
            return self.regressors.index(name)
        except ValueError:
            return None

    def bank_index(self, bank_id):
        try:
            return self.bank_ids.index(str(bank_id))
        except ValueError:
            raise ValidationError('unknown bank id: {}'.format(bank_id), ids=[bank_id])

    def observation(self, index):
        return Observation(index=index, bank_id=self.bank_ids[self.group[index]],
            year=int(self.row_years[index]), t=int(self.t[index]),
            group=int(self.group[index]), v=self.v[index],
            outputs=self.outputs[index])

    def with_cost(self, c):
        '''Same regressors with a different log-cost column.'''
        c = np.asarray(c, dtype=np.float64)
        assert c.shape == self.c.shape, "cost vector does not match the design"
        return replace(self, c=_frozen(c))


def _frozen(array):
    array = np.array(array)
    array.setflags(write=False)
    return array


def build_design(data, regressors=None, normalize_prices=False):
    '''
    Build the translog design from a validated PanelDataset.

    `regressors` picks a subset of the nine canonical regressors (Y1..Y3
    are required). With `normalize_prices`, C, W1 and W2 are divided by W3
    before logging and W3 leaves the regressor list.
    '''
    names = tuple(regressors) if regressors is not None else REGRESSORS
    unknown = [name for name in names if name not in REGRESSORS]
    if unknown:
        raise ConfigError('unknown regressors: {}'.format(', '.join(unknown)))
    if not set(OUTPUTS) <= set(names):
        raise ConfigError('regressors must include Y1, Y2 and Y3')
    if len(set(names)) != len(names):
        raise ConfigError('regressors must be distinct')
    names = tuple(name for name in REGRESSORS if name in names)

    frame = data.frame
    levels = {name: frame[name].to_numpy(dtype=np.float64) for name in ('C',) + REGRESSORS}
    if normalize_prices:
        w3 = levels['W3']
        for name in ('C', 'W1', 'W2'):
            levels[name] = levels[name] / w3
        names = tuple(name for name in names if name != 'W3')

    v = np.column_stack([np.log(levels[name]) for name in names])
    bank_ids = data.bank_ids
    years = data.years
    group = np.searchsorted(np.asarray(bank_ids), frame['bank_id'].to_numpy())
    t = frame['year'].to_numpy(dtype=np.int64) - years[0] + 1
    D = (t[:, None] == np.arange(2, len(years) + 1)[None, :]).astype(np.float64)
    outputs = np.column_stack([levels[name] for name in OUTPUTS])

    return TranslogDesign(v=_frozen(v), vquad=_frozen(quad_expand(v)), D=_frozen(D),
        group=_frozen(group.astype(np.int64)), t=_frozen(t),
        c=_frozen(np.log(levels['C'])), outputs=_frozen(outputs),
        bank_ids=bank_ids, years=years, regressors=names,
        normalized=bool(normalize_prices))
