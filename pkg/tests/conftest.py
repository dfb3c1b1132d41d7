import numpy as np
import pandas as pd
import pytest

from qcost.estimators import LocationFit, LocationScaleEstimator, QuantileFit, ScaleFit
from qcost.measures.core import CostSurface
from qcost.panel import PanelDataset, build_design
from qcost.simulation import DgpSpec, simulate_panel

OUTPUT_ONLY = ['Y1', 'Y2', 'Y3']


class LinearSurface(CostSurface):
    '''Q = intercept + drift * (t - 1) + v @ coef, with an exact gradient.'''

    def __init__(self, coef, regressors, intercept=0.0, drift=0.0, tau=0.5, effects=None):
        self.coef = np.asarray(coef, dtype=np.float64)
        self.regressors = tuple(regressors)
        self.intercept = intercept
        self.drift = drift
        self.tau = tau
        self.effects = np.zeros(0) if effects is None else np.asarray(effects)

    def predict_array(self, v, t, mu=0.0):
        v = np.atleast_2d(v)
        return self.intercept + self.drift * (np.asarray(t) - 1) + v @ self.coef + mu

    def gradient_array(self, v, t):
        return np.tile(self.coef, (np.atleast_2d(v).shape[0], 1))

    def bank_effects(self):
        return self.effects


def panel_frame(n=6, T=3, seed=0, outputs=None):
    '''Positive random panel in canonical columns, banks b01.. and years from 2001.'''
    rng = np.random.default_rng(seed)
    N = n * T
    frame = pd.DataFrame({
        'bank_id': np.repeat(['b{:02d}'.format(i + 1) for i in range(n)], T),
        'year': np.tile(np.arange(2001, 2001 + T), n),
        'C': np.exp(rng.normal(3.0, 0.5, N))})
    for name in ('Y1', 'Y2', 'Y3'):
        frame[name] = np.exp(rng.normal(5.0, 1.0, N))
    for name in ('W1', 'W2', 'W3'):
        frame[name] = np.exp(rng.normal(-3.0, 0.2, N))
    for name in ('K1', 'K2', 'K3'):
        frame[name] = np.exp(rng.normal(4.0, 0.5, N))
    if outputs is not None:
        for j, name in enumerate(('Y1', 'Y2', 'Y3')):
            frame[name] = outputs[:, j]
    return frame


def proportional_outputs(n, T, base=(4.0, 2.0, 1.0), seed=0):
    '''Outputs s_it * base; every bank-year has the same output mix.'''
    rng = np.random.default_rng(seed)
    s = np.exp(rng.uniform(0.0, 3.0, n * T))
    s[0] = 1.0
    return s[:, None] * np.asarray(base)[None, :]


@pytest.fixture
def frame():
    return panel_frame()


@pytest.fixture
def design(frame):
    return build_design(PanelDataset.from_frame(frame))


@pytest.fixture
def proportional_design():
    outputs = proportional_outputs(8, 3)
    data = PanelDataset.from_frame(panel_frame(8, 3, outputs=outputs))
    return build_design(data, regressors=OUTPUT_ONLY)


@pytest.fixture(scope='session')
def simulation():
    return simulate_panel(DgpSpec(n=30, T=4, seed=11, regressors=OUTPUT_ONLY,
        gamma1=[0.01, 0.0, 0.0]))


@pytest.fixture(scope='session')
def fit(simulation):
    return LocationScaleEstimator().fit(simulation.design)


def random_fit(rng, k=4, T=3, tau=0.75, q_tau=0.6, n=3):
    p = k * (k + 1) // 2
    meta = dict(bank_ids=tuple('b{}'.format(i) for i in range(n)),
        years=tuple(range(2001, 2001 + T)), regressors=tuple('x{}'.format(j) for j in range(k)))
    loc = LocationFit(beta0=rng.normal(), eta=rng.normal(0, 0.1, T - 1),
        beta1=rng.normal(size=k), beta1_star=rng.normal(0, 0.1, k),
        beta2=rng.normal(0, 0.1, p), beta2_star=rng.normal(0, 0.05, p),
        lambda_=rng.normal(size=n), residuals=np.empty(0), **meta)
    sc = ScaleFit(gamma0=abs(rng.normal()), theta=rng.normal(0, 0.1, T - 1),
        gamma1=rng.normal(0, 0.1, k), gamma1_star=rng.normal(0, 0.05, k),
        gamma2=rng.normal(0, 0.05, p), gamma2_star=rng.normal(0, 0.02, p),
        sigma=rng.normal(0, 0.1, n), scale_values=np.empty(0), violations=(), **meta)
    return QuantileFit(tau=tau, q_tau=q_tau, location=loc, scale=sc)
