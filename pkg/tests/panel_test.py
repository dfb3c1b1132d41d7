#!usr/bin/env python

'''
Loading, validation and the translog design.
'''

import numpy as np
import pytest

from qcost.error import ConfigError, DuplicateObservationError, SchemaError, ValidationError
from qcost.panel import (PanelDataset, build_design, load_panel, quad_expand, quad_matrix,
    within_transform)
from conftest import panel_frame


def _write(frame, path):
    frame.to_csv(path, index=False)
    return str(path)


def test_load_panel_sorts_and_keeps_valid_rows(tmp_path):
    frame = panel_frame(4, 3).sample(frac=1.0, random_state=3)
    data = load_panel(_write(frame, tmp_path / 'panel.csv'))
    assert len(data) == 12
    assert data.bank_ids == ('b01', 'b02', 'b03', 'b04')
    assert data.years == (2001, 2002, 2003)
    assert list(data.frame['year'][:3]) == [2001, 2002, 2003]
    assert len(data.rejections) == 0


def test_load_panel_reports_rejected_rows(tmp_path):
    frame = panel_frame(4, 3).astype({'C': object, 'W2': object})
    frame.loc[1, 'C'] = ''
    frame.loc[4, 'W2'] = -1.0
    data = load_panel(_write(frame, tmp_path / 'panel.csv'))
    assert len(data) == 10
    assert list(data.rejections['row']) == [2, 5]
    assert data.rejections['reason'].iloc[0] == 'missing or non-numeric C'
    assert data.rejections['reason'].iloc[1] == 'non-positive W2'


def test_schema_maps_column_names(tmp_path):
    frame = panel_frame(3, 2).rename(columns={'C': 'total_cost', 'bank_id': 'rssd'})
    path = _write(frame, tmp_path / 'panel.csv')
    data = load_panel(path, schema={'C': 'total_cost', 'bank_id': 'rssd'})
    assert data.n_banks == 3
    with pytest.raises(SchemaError):
        load_panel(path)
    with pytest.raises(SchemaError):
        load_panel(path, schema={'cost': 'total_cost'})


def test_missing_file_is_a_schema_error(tmp_path):
    with pytest.raises(SchemaError, match='nope.csv'):
        load_panel(str(tmp_path / 'nope.csv'))


def test_duplicate_observation():
    frame = panel_frame(3, 3)
    frame.loc[4, 'year'] = frame.loc[3, 'year']
    with pytest.raises(DuplicateObservationError) as info:
        PanelDataset.from_frame(frame)
    assert info.value.ids == [('b02', 2001)]


def test_singleton_bank_and_year_gap():
    frame = panel_frame(3, 3)
    with pytest.raises(ValidationError, match='single observation'):
        PanelDataset.from_frame(frame.drop(index=[0, 1]))
    with pytest.raises(ValidationError, match='missing 2002'):
        PanelDataset.from_frame(frame[frame['year'] != 2002])


def test_design_shapes(design):
    assert design.k == 9
    assert design.vquad.shape == (design.N, 45)
    assert design.D.shape == (design.N, 2)
    assert (design.D.sum(axis=1) == (design.t >= 2)).all()
    assert design.output_columns == [0, 1, 2]
    assert not design.v.flags.writeable


def test_design_regressor_subset_and_price_normalization(frame):
    data = PanelDataset.from_frame(frame)
    design = build_design(data, regressors=['Y3', 'Y1', 'Y2', 'K1'])
    assert design.regressors == ('Y1', 'Y2', 'Y3', 'K1')
    normalized = build_design(data, normalize_prices=True)
    assert 'W3' not in normalized.regressors
    np.testing.assert_allclose(normalized.c,
        np.log(frame['C'] / frame['W3']).to_numpy(), rtol=1e-12)
    with pytest.raises(ConfigError):
        build_design(data, regressors=['Y1', 'Y2'])
    with pytest.raises(ConfigError):
        build_design(data, regressors=['Y1', 'Y2', 'Y3', 'Z9'])


def test_quadratic_expansion_matches_quadratic_form():
    rng = np.random.default_rng(1)
    v = rng.normal(size=4)
    coef = rng.normal(size=10)
    A = quad_matrix(coef, 4)
    np.testing.assert_allclose(A, A.T)
    np.testing.assert_allclose(coef @ quad_expand(v), v @ A @ v, rtol=1e-12)


def test_within_transform_demeans_each_bank():
    group = np.array([0, 0, 1, 1, 1])
    x = np.array([1.0, 3.0, 2.0, 4.0, 9.0])
    np.testing.assert_allclose(within_transform(x, group), [-1.0, 1.0, -3.0, -1.0, 4.0])
    with pytest.raises(ValidationError):
        within_transform(x[:3], group[:3])


def test_observation_record(design):
    obs = design.observation(4)
    assert obs.bank_id == 'b02'
    assert obs.year == 2002
    assert obs.t == 2
    np.testing.assert_allclose(np.exp(obs.v[:3]), obs.outputs)
