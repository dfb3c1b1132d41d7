#!usr/bin/env python

'''
Summary tables and plot-data files.
'''

import json
import os

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import trapezoid

from qcost.report import (density_table, five_number_summary, lad_association, obs_share,
    obs_share_series, sorted_estimates, summary_table, write_report, yearly_boxplot)


def _scope_frame(design, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for tau in (0.25, 0.75):
        for i in range(design.N):
            obs = design.observation(i)
            estimate = rng.normal(0.1, 0.05)
            lower = estimate - 0.08
            rows.append({'bank_id': obs.bank_id, 'year': obs.year, 'tau': tau,
                'estimate': estimate, 'admissible': i % 5 != 0, 'lower_1s': lower,
                'lower_2s': lower - 0.02, 'upper_2s': estimate + 0.1,
                'category': 'scope economies' if lower > 0 else 'no scope economies',
                'category_2s': 'scope invariance' if lower - 0.02 <= 0 else
                    'scope non-invariance'})
    frame = pd.DataFrame(rows)
    frame.loc[~frame['admissible'], 'estimate'] = np.nan
    return frame


def test_five_number_summary():
    assert five_number_summary([3.0, 1.0, np.nan, 5.0, 2.0, 4.0]) == (1.0, 2.0, 3.0, 4.0, 5.0)


def test_equal_outputs_give_a_third():
    np.testing.assert_allclose(obs_share(np.full((4, 3), 7.0)), 1 / 3)


def test_density_integrates_to_one():
    rng = np.random.default_rng(0)
    table, bandwidths = density_table({'a': rng.normal(size=300),
        'b': rng.normal(2.0, 0.5, 300)})
    for label, group in table.groupby('label'):
        assert len(group) == 512
        assert trapezoid(group['density'], group['x']) == pytest.approx(1.0, abs=1e-3)
    assert set(bandwidths) == {'a', 'b'}


def test_density_of_a_constant_sample():
    with pytest.warns(RuntimeWarning):
        table, bandwidths = density_table({'a': np.ones(10)})
    assert table.empty
    assert bandwidths == {}


def test_summary_shares(design):
    frame = _scope_frame(design)
    summary = summary_table(frame, 'scope')
    assert list(summary['tau']) == [0.25, 0.75]
    assert (summary['n'] + summary['n_excluded'] == design.N).all()
    pairs = summary['pct scope economies'] + summary['pct no scope economies']
    np.testing.assert_allclose(pairs, 100.0)
    pairs = summary['pct scope invariance'] + summary['pct scope non-invariance']
    np.testing.assert_allclose(pairs, 100.0)
    ok = frame[(frame['tau'] == 0.25) & frame['admissible']]
    assert summary['mean'].iloc[0] == pytest.approx(ok['estimate'].mean())
    assert summary['median'].iloc[0] == pytest.approx(ok['estimate'].median())


def test_summary_bounds_from_replica_summaries(design):
    frame = _scope_frame(design)
    rng = np.random.default_rng(1)
    replicas = {0.25: rng.normal(0.1, 0.01, (50, 4)), 0.75: rng.normal(0.1, 0.01, (50, 4))}
    summary = summary_table(frame, 'scope', replicas)
    assert (summary['mean_lower'] <= summary['mean_upper']).all()
    assert {'q1_lower', 'median_upper', 'q3_upper'} <= set(summary)


def test_sorted_estimates_and_boxplot(design):
    frame = _scope_frame(design)
    table = sorted_estimates(frame)
    for _, group in table.groupby('tau'):
        assert (np.diff(group['estimate']) >= 0).all()
        assert list(group['rank']) == list(range(1, len(group) + 1))
    box = yearly_boxplot(frame)
    assert len(box) == 2 * len(design.years)
    assert (box['min'] <= box['median']).all() and (box['median'] <= box['max']).all()


def test_share_series_and_association(design):
    series = obs_share_series(design)
    assert list(series['year']) == list(design.years)
    assert ((series['q0.5'] >= 0) & (series['q0.5'] <= 1)).all()
    association = lad_association(_scope_frame(design), design)
    assert list(association['tau']) == [0.25, 0.75]
    assert np.isfinite(association['slope']).all()


def test_write_report(tmp_path, design):
    output_dir = str(tmp_path / 'report')
    paths = write_report(output_dir, _scope_frame(design), design)
    names = sorted(os.path.basename(p) for p in paths)
    assert names == sorted(['sorted_estimates.csv', 'density.csv', 'yearly_boxplot.csv',
        'obs_share_series.csv', 'obs_share_density.csv', 'lad_association.csv',
        'report_metadata.json'])
    assert all(os.path.isfile(p) for p in paths)
    with open(os.path.join(output_dir, 'report_metadata.json')) as handle:
        metadata = json.load(handle)
    assert metadata['bandwidth_rule'] == 'silverman'
    assert set(metadata['bandwidths']) == {'0.25', '0.75'}
