#!usr/bin/env python

'''
Tests to ensure the registered measures load and evaluate, plus the
subadditivity, returns-to-scale and technical-change fixtures.
'''

import time
import traceback

import numpy as np
import pytest

import qcost
from qcost.error import AdmissibilityError, UnregisteredMeasure, ValidationError
from qcost.estimators import QuantileFit
from qcost.measures.core import FunctionSurface, MeasureValues, measure_frame
from qcost.measures.measure_list import MEASURE_LIST
from qcost.measures.scale import ILL_SIGNED, ReturnsToScaleMeasure, returns_to_scale
from qcost.measures.scope import (NEGATIVE_REBASED, ScopeSample, SubadditivityMeasure,
    admissible_weights, subadditivity, weight_distributions)
from qcost.measures.tech_change import TechChangeMeasure, tech_change
from qcost.panel import PanelDataset, build_design
from qcost.report import summary_table
from qcost.utils import create_measure
from conftest import OUTPUT_ONLY, LinearSurface, random_fit


def pytest_generate_tests(metafunc):
    if not hasattr(metafunc.cls, 'scenarios'):
        return
    idlist = []
    argvalues = []
    for scenario in metafunc.cls.scenarios:
        idlist.append(scenario[0])
        items = scenario[1].items()
        argnames = [x[0] for x in items]
        argvalues.append([x[1] for x in items])
    metafunc.parametrize(argnames, argvalues, ids=idlist, scope="class")


def additive(v, t):
    return np.log(np.exp(v[:, :3]).sum(axis=1))


def concave(v, t):
    return 0.5 * np.log(np.exp(v[:, :3]).sum(axis=1))


class TestMeasure:
    scenarios = [(i, {'config': {'measure_id': i}}) for i in MEASURE_LIST]

    def _build_measure(self, measure_id):
        return qcost.make(measure_id, **({'grid_step': 0.5} if measure_id == 'Scope-v0' else {}))

    def test_make(self, config):
        # Ensures that measures are instantiated
        try:
            measure = self._build_measure(config['measure_id'])
            success = True
        except Exception as e:
            tb = e.__traceback__
            success = False
        assert success, ''.join(traceback.format_tb(tb))
        assert measure.kind in ('scope', 'scale', 'tc')

    def test_evaluate_all(self, config, design):
        measure = self._build_measure(config['measure_id']).prepare(design)
        surface = LinearSurface([0.3, 0.2, 0.1, 0.4, 0.3, 0.3, 0.1, 0.0, 0.0],
            design.regressors, drift=-0.01)
        values = measure.evaluate_all(surface)
        assert isinstance(values, MeasureValues)
        assert len(values.estimate) == len(values.rows) == len(values.flags)
        ok = values.flags == ''
        assert np.isfinite(values.estimate[ok]).all()
        result = measure.evaluate(surface, int(values.rows[-1]))
        assert result.measure == measure.name
        assert result.tau == 0.5

    def test_needs_prepare(self, config):
        measure = self._build_measure(config['measure_id'])
        with pytest.raises(RuntimeError):
            measure.evaluate_all(LinearSurface(np.zeros(9), qcost.panel.REGRESSORS))


def test_registry_lookups():
    assert isinstance(create_measure('scope', grid_step=0.5), SubadditivityMeasure)
    assert isinstance(create_measure('Scale-v0'), ReturnsToScaleMeasure)
    assert isinstance(create_measure({'measure': 'tc'}), TechChangeMeasure)
    measure = create_measure('scope', config={'grid_step': '0.25'})
    assert measure.K == 4
    assert qcost.spec('TC-v0').entry_point.endswith(':TechChangeMeasure')
    with pytest.raises(UnregisteredMeasure):
        create_measure('Efficiency-v0')


def test_half_step_distributions():
    expected = [(0, 0, 1), (0, 0.5, 0.5), (0, 1, 0), (0.5, 0, 0.5), (0.5, 0.5, 0), (1, 0, 0)]
    np.testing.assert_array_equal(weight_distributions(2) / 2, expected)


def test_unbounded_ratios_admit_the_whole_lattice():
    mins = np.ones(3)
    bounds = (np.zeros((3, 3)), np.full((3, 3), np.inf))
    triples = admissible_weights([10.0, 20.0, 30.0], mins, bounds, 0.1)
    assert len(triples) == 66 ** 3
    w = triples[12345].w
    np.testing.assert_allclose(w.sum(axis=1), 1.0)
    assert ((w >= 0) & (w <= 1)).all()
    assert len(admissible_weights([10.0, 20.0, 30.0], mins, bounds, 0.5)) == 216


def test_negative_rebased_outputs_are_inadmissible():
    bounds = (np.zeros((3, 3)), np.full((3, 3), np.inf))
    assert admissible_weights([10.0, 2.5, 30.0], np.ones(3), bounds, 0.1) == []


def test_additive_cost_has_no_scope_effect(proportional_design):
    measure = SubadditivityMeasure(grid_step=0.1).prepare(proportional_design)
    values = measure.evaluate_all(FunctionSurface(additive, regressors=OUTPUT_ONLY))
    ok = values.flags == ''
    assert ok.sum() >= 5
    assert np.abs(values.estimate[ok]).max() < 1e-10
    assert set(values.flags[~ok]) <= {NEGATIVE_REBASED}
    weights = values.extras['weights'][ok]
    np.testing.assert_allclose(weights.sum(axis=2), 1.0)


def test_concave_cost_has_scope_economies(proportional_design):
    measure = SubadditivityMeasure(grid_step=0.1).prepare(proportional_design)
    values = measure.evaluate_all(FunctionSurface(concave, regressors=OUTPUT_ONLY))
    ok = values.flags == ''
    assert (values.estimate[ok] > 0).all()


def test_finer_grid_never_raises_the_minimum(proportional_design):
    design = proportional_design
    sample = ScopeSample.from_outputs(design.outputs)
    surface = FunctionSurface(
        lambda v, t: 0.8 * np.log(np.exp(v) @ [1.0, 2.0, 0.5]) + 0.05 * v[:, 0] ** 2,
        regressors=OUTPUT_ONLY)
    checked = 0
    for index in range(design.N):
        obs = design.observation(index)
        if (obs.outputs < 3 * sample.mins).any():
            with pytest.raises(AdmissibilityError):
                subadditivity(surface, obs, 0.1, sample)
            continue
        coarse = subadditivity(surface, obs, 0.1, sample)
        fine = subadditivity(surface, obs, 0.05, sample)
        assert fine.estimate <= coarse.estimate + 1e-12
        checked += 1
        if checked == 3:
            break
    assert checked == 3


def curved(v, t):
    return 0.7 * np.log(np.exp(v) @ [1.0, 2.0, 0.5]) + 0.04 * (v[:, 0] - v[:, 1]) ** 2 \
        + 0.02 * v[:, 2] ** 2


def _ratio_sums(surface, obs, sample, weights):
    '''sum_kappa exp(Q_kappa - Q) - 1 for a stack of (3, 3) weight matrices.'''
    ystar = np.asarray(obs.outputs) - 3 * sample.mins
    banks = np.transpose(weights, (0, 2, 1)) * ystar + sample.mins
    q = surface.predict_array(np.log(banks.reshape(-1, 3)), obs.t).reshape(-1, 3)
    q0 = surface.predict_array(np.asarray(obs.v)[None, :], obs.t)[0]
    return np.exp(q - q0).sum(axis=1) - 1.0


@pytest.mark.parametrize('grid_step', [0.5, 0.25, 0.2])
def test_search_matches_every_admissible_triple(frame, grid_step):
    design = build_design(PanelDataset.from_frame(frame), regressors=OUTPUT_ONLY)
    sample = ScopeSample.from_outputs(design.outputs)
    surface = FunctionSurface(curved, regressors=OUTPUT_ONLY)
    checked = 0
    for index in range(design.N):
        obs = design.observation(index)
        triples = admissible_weights(obs.outputs, sample.mins,
            (sample.ratio_lo, sample.ratio_hi), grid_step)
        if not triples:
            continue
        everything = _ratio_sums(surface, obs, sample, np.stack([x.w for x in triples]))
        result = subadditivity(surface, obs, grid_step, sample)
        assert result.estimate == pytest.approx(everything.min(), abs=1e-12)
        at_argmin = _ratio_sums(surface, obs, sample, result.argmin_weights.w[None])[0]
        assert at_argmin == pytest.approx(result.estimate, abs=1e-12)
        assert result.argmin_weights.flags.all()
        checked += 1
    assert checked >= 3


def test_flags_mark_out_of_range_banks():
    mins = np.ones(3)
    bounds = (np.full((3, 3), 0.5), np.full((3, 3), 2.0))
    every = admissible_weights([10.0, 10.0, 10.0], mins, bounds, 0.5, include_inadmissible=True)
    admissible = admissible_weights([10.0, 10.0, 10.0], mins, bounds, 0.5)
    assert len(every) == 216
    assert 0 < len(admissible) < len(every)
    assert sum(bool(x.flags.all()) for x in every) == len(admissible)
    assert all(x.flags.all() for x in admissible)
    # bank A alone holds all of Y1: its outputs (8, 1, 1) leave the ratio range
    specialized = [x for x in every if (x.w[:, 0] == [1.0, 0.0, 0.0]).all()]
    assert specialized and not any(x.flags[0] for x in specialized)


@pytest.mark.slow
def test_scope_throughput():
    # a desk run: 500 banks over 10 years, 5 taus, 100 replicas plus the
    # point estimate, four cores and ten minutes
    budget = 4 * 600.0 / (500 * 10 * 5 * 101)
    simulation = qcost.simulation.simulate_panel(qcost.simulation.DgpSpec(n=100, T=5, seed=4))
    design = simulation.design
    fit = qcost.estimators.LocationScaleEstimator(taus=[0.5]).fit(design).quantiles[0.5]
    measure = SubadditivityMeasure(grid_step=0.1).prepare(design)
    measure.evaluate_all(fit)
    start = time.perf_counter()
    values = measure.evaluate_all(fit)
    elapsed = time.perf_counter() - start
    assert (values.flags == '').sum() > design.N // 2
    assert elapsed / design.N < budget


def test_returns_to_scale_fixtures(frame):
    design = build_design(PanelDataset.from_frame(frame), regressors=OUTPUT_ONLY + ['K1'])
    obs = design.observation(0)
    for coef, expected in (([0.25, 0.15, 0.1, 0.0], 2.0), ([0.1, 0.2, 0.1, 0.2], 2.0),
            ([0.5, 0.3, 0.2, 0.0], 1.0)):
        surface = LinearSurface(coef, design.regressors)
        assert returns_to_scale(surface, obs).estimate == pytest.approx(expected, abs=1e-10)
    result = returns_to_scale(LinearSurface([-0.3, 0.1, 0.1, 0.0], design.regressors), obs)
    assert np.isnan(result.estimate)
    assert result.flag == ILL_SIGNED
    assert not result.admissible


def test_neutral_technical_change(fit):
    loc = fit.location.__class__(**{**vars(fit.location),
        'eta': np.array([-0.02, -0.04, -0.06]), 'beta1_star': np.zeros(3),
        'beta2_star': np.zeros(6)})
    sc = fit.scale.__class__(**{**vars(fit.scale), 'theta': np.zeros(3),
        'gamma1_star': np.zeros(3), 'gamma2_star': np.zeros(6)})
    for tau in (0.1, 0.9):
        q = QuantileFit(tau=tau, q_tau=fit.quantiles[tau].q_tau, location=loc, scale=sc)
        for v in (np.zeros(3), np.array([7.0, 6.0, 5.0])):
            for t in (2, 3, 4):
                obs = _obs(v, t)
                result = tech_change(q, obs)
                assert result.estimate == pytest.approx(0.02, abs=1e-12)
                assert result.extras['non_neutral'] == pytest.approx(0.0, abs=1e-12)


def _obs(v, t):
    return qcost.panel.Observation(index=0, bank_id='b0', year=2000 + t, t=t, group=0, v=v,
        outputs=np.exp(v))


def test_technical_change_identity():
    rng = np.random.default_rng(8)
    for _ in range(200):
        fit = random_fit(rng, k=4, T=4)
        v = rng.normal(0, 2, 4)
        t = int(rng.integers(2, 5))
        result = tech_change(fit, _obs(v, t))
        before = fit.predict_array(v[None, :], np.array([t - 1]))[0]
        after = fit.predict_array(v[None, :], np.array([t]))[0]
        assert result.estimate == pytest.approx(before - after, abs=1e-12)
        assert result.extras['neutral'] + result.extras['non_neutral'] == \
            pytest.approx(result.estimate, abs=1e-10)
    with pytest.raises(ValidationError):
        tech_change(fit, _obs(v, 1))


def test_technical_change_rows_skip_the_first_year(design):
    measure = TechChangeMeasure().prepare(design)
    assert (design.t[measure.rows()] >= 2).all()
    report = measure_frame(measure, {0.5: LinearSurface(np.zeros(9), design.regressors,
        drift=-0.02)})
    assert len(report.frame) == (design.t >= 2).sum()
    assert report.frame['estimate'].mean() == pytest.approx(0.02, abs=1e-10)
    assert (report.frame['category'] == 'unclassified').all()


class SurfaceRun:
    '''Stands in for a BootstrapRun whose replicas are given surfaces.'''

    def __init__(self, surfaces):
        self.surfaces = surfaces

    def quantile_fits(self, tau):
        return self.surfaces


def _scaled(c):
    return lambda v, t: c * np.log(np.exp(v[:, :3]).sum(axis=1))


def test_additive_fixture_is_scope_invariant(proportional_design):
    measure = SubadditivityMeasure(grid_step=0.5).prepare(proportional_design)
    surface = FunctionSurface(additive, regressors=OUTPUT_ONLY)
    run = SurfaceRun([FunctionSurface(_scaled(c), regressors=OUTPUT_ONLY)
        for c in np.linspace(0.9, 1.1, 41)])
    report = measure_frame(measure, {0.5: surface}, run=run)
    ok = report.frame[report.frame['admissible']]
    assert (ok['category_2s'] == 'scope invariance').all()
    summary = summary_table(report.frame, 'scope', report.replica_summaries)
    assert summary['pct scope invariance'].iloc[0] == 100.0
    assert summary['pct scope non-invariance'].iloc[0] == 0.0


def test_crs_fixture_is_classified_crs(frame):
    design = build_design(PanelDataset.from_frame(frame), regressors=OUTPUT_ONLY)
    measure = ReturnsToScaleMeasure().prepare(design)
    point = LinearSurface([0.5, 0.3, 0.2], design.regressors)
    run = SurfaceRun([LinearSurface(np.array([0.5, 0.3, 0.2]) * s, design.regressors)
        for s in np.linspace(0.9, 1.1, 41)])
    report = measure_frame(measure, {0.5: point}, run=run)
    np.testing.assert_allclose(report.frame['estimate'], 1.0, atol=1e-10)
    assert (report.frame['category_2s'] == 'CRS').all()
    assert (report.frame['category'] == 'non-IRS').all()
    summary = summary_table(report.frame, 'scale', report.replica_summaries)
    assert summary['pct CRS'].iloc[0] + summary['pct non-CRS'].iloc[0] == 100.0
    assert summary['mean_lower'].iloc[0] <= 1.0 <= summary['mean_upper'].iloc[0]


def test_measure_frame_with_bootstrap_bounds(simulation, fit):
    from qcost.inference import bootstrap_pipeline
    run = bootstrap_pipeline(simulation.design, fit.location, fit.scale, fit.taus, B=8,
        seed=2)
    measure = TechChangeMeasure().prepare(simulation.design)
    report = measure_frame(measure, {0.5: fit.quantiles[0.5]}, run=run)
    frame = report.frame
    assert {'lower_1s', 'lower_2s', 'upper_2s', 'neutral', 'non_neutral'} <= set(frame)
    assert (frame['lower_2s'] <= frame['upper_2s']).all()
    assert set(frame['category']) <= {'technical progress', 'non-progress'}
    assert report.replica_values[0.5].shape == (8, len(frame))
