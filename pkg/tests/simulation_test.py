#!usr/bin/env python

'''
Synthetic panels: normalizations, innovation moments and the ground-truth
document.
'''

import numpy as np
import pytest

from qcost.error import ConfigError, DgpError
from qcost.simulation import DgpSpec, draw_innovations, innovation_quantile, simulate_panel
from conftest import OUTPUT_ONLY


def test_effects_are_centered(simulation):
    truth = simulation.truth
    assert abs(truth.location.lambda_.sum()) < 1e-12
    assert abs(truth.scale.sigma.sum()) < 1e-12


def test_scale_is_positive(simulation):
    assert (simulation.truth.scale.scale_values > 0).all()
    design = simulation.design
    np.testing.assert_allclose(simulation.truth.scale.values(design.v, design.t, design.group),
        simulation.truth.scale.scale_values, rtol=1e-12)


def test_panel_is_balanced(simulation):
    data = simulation.data
    assert len(data) == 30 * 4
    assert data.n_banks == 30
    assert data.years == (2001, 2002, 2003, 2004)


def test_degenerate_innovations_give_the_location_function():
    sim = simulate_panel(DgpSpec(n=10, T=3, seed=2, regressors=OUTPUT_ONLY,
        innovation='degenerate'))
    design, loc = sim.design, sim.truth.location
    np.testing.assert_allclose(design.c, loc.values(design.v, design.t, design.group),
        atol=1e-10)
    assert not sim.truth.location.residuals.any()


@pytest.mark.parametrize('kind', ['normal', 'lognormal'])
def test_innovations_have_zero_mean_and_unit_absolute_mean(kind):
    eps = draw_innovations(kind, np.random.default_rng(0), 200_000)
    se = eps.std() / np.sqrt(len(eps))
    assert abs(eps.mean()) < 5 * se
    assert abs(np.abs(eps).mean() - 1.0) < 5 * np.abs(eps).std() / np.sqrt(len(eps))


@pytest.mark.parametrize('kind', ['normal', 'lognormal'])
def test_innovation_quantiles_match_draws(kind):
    eps = draw_innovations(kind, np.random.default_rng(1), 200_000)
    for tau in (0.1, 0.5, 0.9):
        assert np.mean(eps <= innovation_quantile(kind, tau)) == pytest.approx(tau, abs=0.005)


def test_same_seed_same_panel():
    spec = DgpSpec(n=5, T=3, seed=8, regressors=OUTPUT_ONLY)
    first = simulate_panel(spec)
    second = simulate_panel(DgpSpec(n=5, T=3, seed=8, regressors=OUTPUT_ONLY))
    np.testing.assert_array_equal(first.design.c, second.design.c)
    np.testing.assert_array_equal(first.design.v, second.design.v)


def test_negative_scale_everywhere_is_a_dgp_error():
    with pytest.raises(DgpError):
        simulate_panel(DgpSpec(n=10, T=3, regressors=OUTPUT_ONLY, gamma0=-100.0))


def test_unknown_innovation_law():
    with pytest.raises(ConfigError):
        DgpSpec(innovation='cauchy')
    with pytest.raises(ValueError):
        draw_innovations('cauchy', np.random.default_rng(0), 3)


@pytest.mark.parametrize('settings', [
    {'n': 1},
    {'T': 1},
    {'eta': [0.1]},
    {'regressors': OUTPUT_ONLY, 'beta1': [0.3, 0.2]},
    {'correlation': 1.0},
])
def test_invalid_dgp_settings(settings):
    with pytest.raises(ConfigError):
        DgpSpec(**settings)


def test_centered_regressors():
    sim = simulate_panel(DgpSpec(n=200, T=5, seed=9, regressors=OUTPUT_ONLY, centered=True))
    np.testing.assert_array_equal(sim.truth.spec.v_mean, np.zeros(3))
    assert np.abs(sim.design.v.mean(axis=0)).max() < 0.2
    uncentered = DgpSpec(regressors=OUTPUT_ONLY, v_mean=[1.0, 2.0, 3.0], centered=True)
    np.testing.assert_array_equal(uncentered.v_mean, [1.0, 2.0, 3.0])


def test_truth_document(simulation):
    doc = simulation.truth.to_dict(simulation.design, taus=(0.25, 0.75))
    assert doc['dgp']['n'] == 30
    assert doc['dgp']['innovation'] == 'normal'
    assert simulation.truth.quantile_fit(0.75).q_tau == \
        pytest.approx(innovation_quantile('normal', 0.75))


def test_settings_from_config():
    spec = DgpSpec(config={'n': '12', 'T': 3, 'regressors': OUTPUT_ONLY,
        'gamma1': [0.01, 0.0, 0.0]})
    assert spec.n == 12
    assert spec.k == 3
    np.testing.assert_array_equal(spec.gamma1, [0.01, 0.0, 0.0])
    assert spec.eta.shape == (2,)
