#!usr/bin/env python

'''
Bias-corrected percentile intervals and the category labels.
'''

import logging
import warnings

import numpy as np
import pytest

from qcost.inference import LABELS, bc_interval, bc_intervals, classify, classify_arrays


def test_centered_point_gives_plain_percentiles():
    replicas = np.arange(1.0, 101.0)
    interval = bc_interval(replicas, 50.5)
    assert interval.z0 == 0.0
    assert interval.bounds_2s == (3.0, 98.0)
    assert interval.lower_1s == 5.0
    assert interval.upper_1s == 95.0
    assert not interval.degenerate


def test_symmetric_replicas_have_no_bias_correction():
    rng = np.random.default_rng(0)
    half = rng.normal(size=250)
    replicas = np.concatenate([half, -half])
    interval = bc_interval(replicas, 0.0)
    assert interval.z0 == 0.0
    assert interval.lower_2s < 0.0 < interval.upper_2s


def test_tied_replicas_count_half():
    # two replicas below, two tied, two above: midrank 3 of 6
    out = bc_intervals(np.array([1.0, 2.0, 3.0, 3.0, 4.0, 5.0]), np.array([3.0]))
    assert out['z0'][0] == 0.0


def test_saturated_count_is_clamped(caplog):
    replicas = np.arange(1.0, 101.0)
    with caplog.at_level(logging.WARNING, logger='qcost.inference.intervals'):
        interval = bc_interval(replicas, 0.0)
    assert 'saturated' in caplog.text
    assert np.isfinite(interval.z0)
    assert interval.z0 < 0
    assert interval.lower_2s == 1.0


def test_identical_replicas_collapse():
    with pytest.warns(RuntimeWarning):
        interval = bc_interval(np.full(50, 0.3), 0.3)
    assert interval.degenerate
    assert interval.z0 == 0.0
    assert interval.bounds_2s == (0.3, 0.3)


def test_missing_replicas_and_points():
    replicas = np.array([[1.0, np.nan], [2.0, np.nan], [3.0, np.nan]])
    with warnings.catch_warnings():
        warnings.simplefilter('error')
        out = bc_intervals(replicas, np.array([np.nan, 1.0]))
        empty = bc_intervals(np.empty((0, 2)), np.array([0.5, 1.0]))
    assert np.isnan(empty['lower_2s']).all()
    for name in ('z0', 'lower_2s', 'upper_2s', 'lower_1s', 'upper_1s'):
        assert np.isnan(out[name]).all(), name


def test_sided_selection():
    replicas = np.arange(1.0, 101.0)
    one = bc_interval(replicas, 50.5, sided='one')
    assert np.isnan(one.lower_2s) and one.lower_1s == 5.0
    two = bc_interval(replicas, 50.5, sided='two')
    assert np.isnan(two.lower_1s) and two.upper_2s == 98.0
    with pytest.raises(ValueError):
        bc_interval(replicas, 50.5, sided='three')


@pytest.mark.parametrize('kind, point, bounds, expected', [
    ('scope', 0.2, dict(lower_1s=0.05, lower_2s=0.01, upper_2s=0.4),
        ('scope economies', 'scope non-invariance')),
    ('scope', 0.02, dict(lower_1s=-0.01, lower_2s=-0.03, upper_2s=0.07),
        ('no scope economies', 'scope invariance')),
    ('scale', 1.01, dict(lower_1s=0.99, lower_2s=0.98, upper_2s=1.04),
        ('non-IRS', 'CRS')),
    ('scale', 1.2, dict(lower_1s=1.1, lower_2s=1.05, upper_2s=1.3),
        ('IRS', 'non-CRS')),
    ('tc', 0.01, dict(lower_1s=-0.002, lower_2s=-0.004, upper_2s=0.02),
        ('non-progress', 'technical stasis')),
    ('tc', 0.03, dict(lower_1s=0.01, lower_2s=0.008, upper_2s=0.05),
        ('technical progress', 'non-stasis')),
])
def test_classify(kind, point, bounds, expected):
    assert tuple(classify(point, bounds, kind)) == expected


def test_classify_without_bounds():
    category = classify(0.2, dict(lower_1s=np.nan, lower_2s=np.nan, upper_2s=np.nan), 'scope')
    assert category.one_sided == 'unclassified'
    assert category.two_sided == 'unclassified'


def test_classify_arrays_matches_classify():
    points = np.array([0.2, 0.02, np.nan])
    intervals = {'lower_1s': np.array([0.05, -0.01, 0.0]),
        'lower_2s': np.array([0.01, -0.03, 0.0]),
        'upper_2s': np.array([0.4, 0.07, 0.0])}
    one, two = classify_arrays(points, intervals, 'scope')
    assert list(one) == ['scope economies', 'no scope economies', 'unclassified']
    assert list(two) == ['scope non-invariance', 'scope invariance', 'unclassified']
    for j in range(2):
        bounds = {name: value[j] for name, value in intervals.items()}
        assert tuple(classify(points[j], bounds, 'scope')) == (one[j], two[j])


def test_every_measure_has_label_pairs():
    for kind, (threshold, one_sided, two_sided) in LABELS.items():
        assert len(one_sided) == len(two_sided) == 2
        assert threshold == (1.0 if kind == 'scale' else 0.0)
