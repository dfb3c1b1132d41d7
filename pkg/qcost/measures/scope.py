'''
Expansion-path cost subadditivity.

A bank-year is compared with three partially specialized counterfactual
banks A, B and C. Output m is split between them with weights that sum to
one on a grid; counterfactual bank kappa produces w_m^kappa * Y*_m + min_m
of output m, where Y*_m = Y_m - 3 min_m, so the three banks together
produce the original outputs. Prices, controls, time and the bank effect
stay at the observed values. The measure is

    S* = min over admissible weights of sum_kappa exp(Q_kappa - Q) - 1,

with Q the log-cost quantile. Weights are admissible when every
counterfactual output ratio stays inside the range observed in the
estimation sample.
'''
import itertools
import logging
from collections import namedtuple
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from joblib import Parallel, delayed

from qcost.error import AdmissibilityError, ConfigError
from qcost.measures.core import Measure, MeasureResult, MeasureValues, bank_effect_rows
from qcost.panel.dataset import OUTPUTS
from qcost.utils import assign_config

logger = logging.getLogger(__name__)

NEGATIVE_REBASED = 'negative rebased output'
NO_COUNTERFACTUAL = 'no admissible counterfactual'

_RATIO_RTOL = 1e-12
_CACHE_TRIPLES = 2_000_000
_CHUNK_TRIPLES = 300_000
_PAIR_BLOCK = 200_000
_SEED_BANKS = 32
_PRUNE_SLACK = 1e-9
_PREDICT_BATCH = 64


@dataclass(frozen=True, eq=False)
class ScopeSample:
    '''Output minima and pairwise output-ratio ranges of the estimation sample.'''
    mins: np.ndarray
    ratio_lo: np.ndarray
    ratio_hi: np.ndarray

    @classmethod
    def from_outputs(cls, outputs):
        outputs = np.asarray(outputs, dtype=np.float64)
        ratios = outputs[:, :, None] / outputs[:, None, :]
        return cls(mins=outputs.min(axis=0), ratio_lo=ratios.min(axis=0),
            ratio_hi=ratios.max(axis=0))


WeightTriple = namedtuple('WeightTriple', ['w', 'flags'])
WeightTriple.__doc__ = '''
w : (3, 3) weights, rows outputs Y1..Y3, columns counterfactual banks A..C;
    every row sums to one
flags : (3,) whether the output ratios of banks A, B and C each lie in the
    sample range
'''


def grid_units(grid_step):
    '''Number of grid units K with K * grid_step == 1.'''
    K = int(round(1.0 / grid_step))
    if K < 1 or abs(K * grid_step - 1.0) > 1e-9:
        raise ConfigError('grid_step must divide 1, got {}'.format(grid_step))
    return K


@lru_cache(maxsize=8)
def weight_distributions(K):
    '''
    All splits (a, b, c) of K units over banks A, B, C, with a then b
    increasing.
    '''
    return np.array([(a, b, K - a - b) for a in range(K + 1) for b in range(K + 1 - a)],
        dtype=np.int64)


@lru_cache(maxsize=8)
def lattice_units(K):
    '''Units (u1, u2, u3) of every counterfactual bank, indexed u1(K+1)^2 + u2(K+1) + u3.'''
    return np.indices((K + 1,) * 3).reshape(3, -1).T


def _chunk_columns(K, first, last):
    '''
    Column index of banks A, B and C for the triples whose output-1 split
    lies in [first, last), flattened in (p1, p2, p3) order.
    '''
    P = weight_distributions(K)
    base = K + 1
    cols = []
    for kappa in range(3):
        col = P[first:last, kappa][:, None, None] * base ** 2 + \
            P[:, kappa][None, :, None] * base + P[:, kappa][None, None, :]
        cols.append(col.ravel())
    return np.vstack(cols)


@lru_cache(maxsize=2)
def _cached_columns(K):
    return _chunk_columns(K, 0, len(weight_distributions(K)))


def triple_chunks(K):
    '''Yield (offset, columns) covering every weight triple of the lattice.'''
    n_p = len(weight_distributions(K))
    if n_p ** 3 <= _CACHE_TRIPLES:
        yield 0, _cached_columns(K)
        return
    step = max(1, _CHUNK_TRIPLES // n_p ** 2)
    for first in range(0, n_p, step):
        last = min(first + step, n_p)
        yield first * n_p ** 2, _chunk_columns(K, first, last)


def decode_triple(index, K):
    '''Weights matrix of a flat triple index.'''
    P = weight_distributions(K)
    n_p = len(P)
    p1, rest = divmod(int(index), n_p ** 2)
    p2, p3 = divmod(rest, n_p)
    return P[[p1, p2, p3]] / K


def counterfactual_outputs(outputs, sample, K):
    '''(n, C, 3) outputs of every lattice bank; rows with negative Y* are clipped.'''
    outputs = np.atleast_2d(np.asarray(outputs, dtype=np.float64))
    ystar = np.maximum(outputs - 3 * sample.mins, 0.0)
    U = lattice_units(K) / K
    return U[None, :, :] * ystar[:, None, :] + sample.mins


def admissible_columns(cf, sample):
    '''Lattice banks whose pairwise output ratios lie in the sample range.'''
    ratios = cf[..., :, None] / cf[..., None, :]
    lo = sample.ratio_lo - _RATIO_RTOL * np.abs(sample.ratio_lo)
    hi = sample.ratio_hi + _RATIO_RTOL * np.abs(sample.ratio_hi)
    return ((ratios >= lo) & (ratios <= hi)).all(axis=(-2, -1))


def _rebased_negative(outputs, sample):
    return (np.atleast_2d(outputs) - 3 * sample.mins < 0).any(axis=1)


def admissible_weights(outputs, sample_mins, ratio_bounds, grid_step, include_inadmissible=False):
    '''
    Every admissible weight triple for one observation.

    Parameters
    ----------
    outputs : (3,) output levels Y1..Y3
    sample_mins : (3,) sample minima of the outputs
    ratio_bounds : (lo, hi) pair of (3, 3) arrays bounding Y_m / Y_m'
    grid_step : weight increment; must divide 1
    include_inadmissible : also list triples with an out-of-range bank,
        which then carry False in their flags

    Returns
    -------
    list of WeightTriple in lattice order; empty when the rebased outputs
    are negative or nothing is admissible
    '''
    K = grid_units(grid_step)
    sample = ScopeSample(mins=np.asarray(sample_mins, dtype=np.float64),
        ratio_lo=np.asarray(ratio_bounds[0], dtype=np.float64),
        ratio_hi=np.asarray(ratio_bounds[1], dtype=np.float64))
    if _rebased_negative(outputs, sample)[0]:
        return []
    ok = admissible_columns(counterfactual_outputs(outputs, sample, K), sample)[0]
    triples = []
    for offset, cols in triple_chunks(K):
        flags = ok[cols].T
        keep = np.arange(cols.shape[1]) if include_inadmissible else \
            np.flatnonzero(flags.all(axis=1))
        triples.extend(WeightTriple(w=decode_triple(offset + i, K), flags=flags[i])
            for i in keep)
    return triples


def _lattice_ratios(fit, v, t, mu, outputs, sample, K, output_columns):
    '''exp(Q_cf - Q) per lattice bank, inf where inadmissible, and the negative-Y* mask.'''
    v = np.atleast_2d(v)
    n, k = v.shape
    negative = _rebased_negative(outputs, sample)
    cf = counterfactual_outputs(outputs, sample, K)
    ok = admissible_columns(cf, sample) & ~negative[:, None]
    C = cf.shape[1]
    v_cf = np.repeat(v[:, None, :], C, axis=1)
    v_cf[..., list(output_columns)] = np.log(cf)
    q0 = fit.predict_array(v, t, mu)
    q_cf = fit.predict_array(v_cf.reshape(-1, k), np.repeat(t, C),
        np.repeat(mu, C)).reshape(n, C)
    with np.errstate(over='ignore', invalid='ignore'):
        f = np.exp(q_cf - q0[:, None])
    return np.where(ok & np.isfinite(f), f, np.inf), negative


def _unit_index(units, K):
    base = K + 1
    return units @ np.array([base ** 2, base, 1])


@lru_cache(maxsize=8)
def _even_columns(K):
    '''(3, n) bank indices of the triples that split every output as evenly as K allows.'''
    q, r = divmod(K, 3)
    even = sorted(set(itertools.permutations([q + (i < r) for i in range(3)])))
    splits = np.array(list(itertools.product(even, repeat=3)))
    return _unit_index(np.transpose(splits, (2, 0, 1)), K)


def _pair_search(f, first, second, K):
    '''
    Smallest f[a] + f[b] + f[c] with a from `first`, b from `second` and c
    the bank holding the remaining units. Returns the value and (a, b, c).
    '''
    units = lattice_units(K)
    full = len(units) - 1
    best, where = np.inf, None
    step = max(1, _PAIR_BLOCK // max(len(second), 1))
    for lo in range(0, len(first), step):
        a_block = first[lo:lo + step]
        rest = K - units[a_block][:, None, :] - units[second][None, :, :]
        i, j = np.nonzero((rest >= 0).all(axis=2))
        if not len(i):
            continue
        a, b = a_block[i], second[j]
        c = full - a - b
        total = f[a] + f[b] + f[c]
        k = int(np.argmin(total))
        if total[k] < best:
            best, where = total[k], (a[k], b[k], c[k])
    return best, where


def _lattice_search(f, K, bound=np.inf):
    '''
    Smallest sum over banks A..C of f for one observation, with the
    minimizing bank indices; (inf, None) when nothing is admissible.

    f is the same function for the three banks, so the ordering of a
    triple does not matter. With the banks of a minimizing triple sorted
    by f, the smallest f is at most bound / 3 and the middle one at most
    (bound - min f) / 2, for any feasible `bound`.
    '''
    alive = np.flatnonzero(np.isfinite(f))
    if not len(alive):
        return np.inf, None
    values = f[alive]
    if not np.isfinite(bound):
        seeds = alive[np.argsort(values, kind='stable')[:_SEED_BANKS]]
        bound = _pair_search(f, seeds, alive, K)[0]
    slack = 1.0 + _PRUNE_SLACK
    first = alive[values <= bound / 3.0 * slack]
    second = alive[values <= (bound - values.min()) / 2.0 * slack]
    return _pair_search(f, first, second, K)


def _scope_batch(fit, v, t, mu, outputs, sample, K, output_columns):
    f, negative = _lattice_ratios(fit, v, t, mu, outputs, sample, K, output_columns)
    n = len(f)
    estimate = np.full(n, np.nan)
    weights = np.full((n, 3, 3), np.nan)
    flags = np.full(n, '', dtype=object)
    even = _even_columns(K)
    bounds = (f[:, even[0]] + f[:, even[1]] + f[:, even[2]]).min(axis=1)
    units = lattice_units(K)
    for j in range(n):
        value, banks = _lattice_search(f[j], K, bounds[j])
        if banks is None:
            flags[j] = NO_COUNTERFACTUAL
            continue
        estimate[j] = value - 1.0
        weights[j] = units[list(banks)].T / K
    flags[negative] = NEGATIVE_REBASED
    return estimate, weights, flags


def _output_columns(fit, output_columns):
    if output_columns is not None:
        return tuple(output_columns)
    regressors = tuple(getattr(fit, 'regressors', OUTPUTS))
    return tuple(regressors.index(name) for name in OUTPUTS)


def subadditivity(fit, obs, grid_step, sample, output_columns=None):
    '''
    Subadditivity S* of one observation at the quantile of `fit`.

    Parameters
    ----------
    fit : QuantileFit or CostSurface
    obs : Observation
    grid_step : float
    sample : ScopeSample of the estimation sample
    output_columns : positions of Y1..Y3 in v; taken from fit.regressors
        by default

    Returns
    -------
    MeasureResult with the minimizing weights as a WeightTriple

    Raises
    ------
    AdmissibilityError when no admissible counterfactual exists
    '''
    K = grid_units(grid_step)
    mu = bank_effect_rows(fit, [obs.group])
    estimate, weights, flags = _scope_batch(fit, np.asarray(obs.v)[None, :],
        np.array([obs.t]), mu, np.asarray(obs.outputs)[None, :], sample, K,
        _output_columns(fit, output_columns))
    if flags[0]:
        raise AdmissibilityError('{} in {}: {}'.format(obs.bank_id, obs.year, flags[0]))
    ystar = np.asarray(obs.outputs, dtype=np.float64) - 3 * sample.mins
    banks = weights[0].T * ystar + sample.mins
    return MeasureResult(bank_id=obs.bank_id, year=obs.year, tau=float(fit.tau),
        measure=SubadditivityMeasure.name, estimate=float(estimate[0]),
        argmin_weights=WeightTriple(w=weights[0], flags=admissible_columns(banks, sample)))


class SubadditivityMeasure(Measure):
    '''
    Cost subadditivity S* on the weight lattice.

    Settings:
        grid_step: weight increment, must divide 1 (default 0.1)
        n_jobs: joblib workers across observation batches (default 1)
    '''
    kind = 'scope'
    name = 'S*'

    def __init__(self, *args, **kwargs):
        self.grid_step = 0.1
        self.n_jobs = 1
        assign_config(self, kwargs)
        self.K = grid_units(self.grid_step)

    def prepare(self, design):
        super().prepare(design)
        self.sample = ScopeSample.from_outputs(design.outputs)
        n_negative = int(_rebased_negative(design.outputs, self.sample).sum())
        if n_negative:
            logger.info('%d observations have an output below three sample minima',
                n_negative)
        return self

    def _evaluate_rows(self, fit, rows):
        design = self._require_design()
        output_columns = _output_columns(fit, design.output_columns)
        mu = bank_effect_rows(fit, design.group[rows])
        batches = [slice(lo, lo + _PREDICT_BATCH) for lo in range(0, len(rows), _PREDICT_BATCH)]
        results = Parallel(n_jobs=self.n_jobs)(
            delayed(_scope_batch)(fit, design.v[rows[b]], design.t[rows[b]], mu[b],
                design.outputs[rows[b]], self.sample, self.K, output_columns)
            for b in batches)
        if results:
            estimate = np.concatenate([r[0] for r in results])
            weights = np.concatenate([r[1] for r in results])
            flags = np.concatenate([r[2] for r in results])
        else:
            estimate, weights, flags = np.empty(0), np.empty((0, 3, 3)), np.empty(0, dtype=object)
        n_bad = int((flags != '').sum())
        if n_bad:
            logger.info('tau=%.2f: %d of %d observations without an admissible '
                'counterfactual', fit.tau, n_bad, len(rows))
        return MeasureValues(rows=rows, estimate=estimate, flags=flags,
            extras={'weights': weights})
