'''
Brute-force reference computations used to check the estimators and
measures. They favour obviousness over speed.
'''
import numpy as np

from qcost.panel.design import within_transform
from qcost.utils import np_random
from qcost.simulation.dgp import draw_innovations


def check_objective(u, z, tau, q):
    '''sum of rho_tau(u - z q), rho_tau(x) = x (tau - 1{x < 0}).'''
    x = np.asarray(u, dtype=np.float64) - np.asarray(z, dtype=np.float64) * q
    return float(np.sum(x * (tau - (x < 0))))


def oracle_qreg_1d(u, z, tau):
    '''
    Minimizer of the check objective over q, by evaluating every
    breakpoint u_i / z_i and every midpoint between neighbouring ones.
    Among equal minima the smallest q is returned.
    '''
    u = np.asarray(u, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    breaks = np.unique(u / z)
    candidates = np.unique(np.concatenate([breaks, (breaks[1:] + breaks[:-1]) / 2]))
    values = np.array([check_objective(u, z, tau, q) for q in candidates])
    best = values.min()
    tied = values <= best + 1e-12 * max(1.0, abs(best))
    return float(candidates[tied].min())


def oracle_fd_gradient(fit, v, t, step=1e-5):
    '''Central differences of the log-cost quantile (zero bank effect).'''
    v = np.asarray(v, dtype=np.float64)
    grad = np.empty(len(v))
    for j in range(len(v)):
        up, down = v.copy(), v.copy()
        up[j] += step
        down[j] -= step
        grad[j] = (fit.predict_array(up[None, :], np.array([t]))[0]
            - fit.predict_array(down[None, :], np.array([t]))[0]) / (2 * step)
    return grad


def oracle_quantile_by_simulation(spec, v, t, tau, draws=100_000, seed=0):
    '''
    Empirical tau-quantile of simulated log cost at fixed (v, t) and a
    zero bank effect.
    '''
    loc, sc = spec.stages(('b0',), tuple(range(spec.T)))
    v = np.asarray(v, dtype=np.float64)[None, :]
    location = loc.values(v, np.array([t]))[0]
    scale = sc.values(v, np.array([t]))[0]
    eps = draw_innovations(spec.innovation, np_random(seed), draws, spec.innovation_shape)
    return float(np.quantile(location + scale * eps, tau))


def within_ols(design, y=None):
    '''
    Within-bank OLS of y on the translog terms and time dummies, without
    time-varying slopes.

    Returns
    -------
    (beta1, beta2, eta)
    '''
    y = design.c if y is None else np.asarray(y, dtype=np.float64)
    X = np.hstack([design.v, 0.5 * design.vquad, design.D])
    coef, *_ = np.linalg.lstsq(within_transform(X, design.group),
        within_transform(y, design.group), rcond=None)
    k, p = design.k, design.vquad.shape[1]
    return coef[:k], coef[k:k + p], coef[k + p:]
