'''
JSON fit artifacts: every coefficient vector, bank effects keyed by
bank_id, residuals and scale values keyed by "bank_id|year", convergence
metadata and the identification normalizations.
'''
import json
import logging
import os

import numpy as np

from qcost.error import ArtifactError
from qcost.estimators.estimator import LocationScaleFit
from qcost.estimators.location_scale import LocationFit, ScaleFit
from qcost.estimators.quantile import QuantileFit
from qcost.version import VERSION

logger = logging.getLogger(__name__)

FORMAT = 'qcost-fit'


def _row_keys(design):
    years = design.row_years
    return ['{}|{}'.format(design.bank_ids[g], int(y)) for g, y in zip(design.group, years)]


def _convergence(fit):
    return {'converged': bool(fit.converged), 'n_iter': int(fit.n_iter),
        'objective': float(fit.objective), 'grad_norm': float(fit.grad_norm),
        'start': fit.start}


def _floats(values):
    return [float(x) for x in np.asarray(values).ravel()]


def fit_to_dict(fit, design=None, normalize_prices=False):
    loc, sc = fit.location, fit.scale
    keys = _row_keys(design) if design is not None else []
    doc = {
        'format': FORMAT,
        'qcost_version': VERSION,
        'regressors': list(loc.regressors),
        'years': [int(y) for y in loc.years],
        'bank_ids': list(loc.bank_ids),
        'normalizations': {
            'eta_1': 0.0, 'theta_1': 0.0, 'beta0_star': 1.0, 'gamma0_star': 1.0,
            'sum_lambda': 0.0, 'sum_sigma': 0.0, 'e_abs_eps_rescaled': False,
            'prices_divided_by_W3': bool(normalize_prices)},
        'location': {
            'beta0': float(loc.beta0), 'eta': _floats(loc.eta),
            'beta1': _floats(loc.beta1), 'beta1_star': _floats(loc.beta1_star),
            'beta2': _floats(loc.beta2), 'beta2_star': _floats(loc.beta2_star),
            'lambda': dict(zip(loc.bank_ids, _floats(loc.lambda_))),
            'residuals': dict(zip(keys, _floats(loc.residuals))),
            'convergence': _convergence(loc)},
        'scale': {
            'gamma0': float(sc.gamma0), 'theta': _floats(sc.theta),
            'gamma1': _floats(sc.gamma1), 'gamma1_star': _floats(sc.gamma1_star),
            'gamma2': _floats(sc.gamma2), 'gamma2_star': _floats(sc.gamma2_star),
            'sigma': dict(zip(sc.bank_ids, _floats(sc.sigma))),
            'scale_values': dict(zip(keys, _floats(sc.scale_values))),
            'positivity_violations': [keys[i] for i in sc.violations] if keys else [],
            'convergence': _convergence(sc)},
        'quantiles': [{'tau': float(tau), 'q_tau': float(q.q_tau)}
            for tau, q in sorted(fit.quantiles.items())],
    }
    return doc


def _vector(section, name, size):
    values = section.get(name)
    if values is None:
        return np.zeros(size)
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (size,):
        raise ArtifactError('{} has length {}, expected {}'.format(name, len(values), size))
    return values


def _by_bank(section, name, bank_ids):
    values = section.get(name) or {}
    if not values:
        return np.zeros(len(bank_ids))
    missing = [b for b in bank_ids if b not in values]
    if missing:
        raise ArtifactError('{} lacks banks: {}'.format(name, ', '.join(missing[:5])))
    return np.array([float(values[b]) for b in bank_ids])


def fit_from_dict(doc):
    '''
    Rebuild a LocationScaleFit. Coefficient vectors left out of `doc`
    default to zero, which is how hand-built fixtures are written.
    '''
    if doc.get('format', FORMAT) != FORMAT:
        raise ArtifactError('not a qcost fit document')
    try:
        regressors = tuple(doc['regressors'])
        years = tuple(int(y) for y in doc['years'])
        bank_ids = tuple(str(b) for b in doc['bank_ids'])
    except KeyError as exc:
        raise ArtifactError('fit document lacks {}'.format(exc))
    k = len(regressors)
    p = k * (k + 1) // 2
    n_times = len(years) - 1
    L = doc.get('location', {})
    S = doc.get('scale', {})
    keys = list((L.get('residuals') or {}).keys())
    lconv = L.get('convergence', {})
    sconv = S.get('convergence', {})

    location = LocationFit(beta0=float(L.get('beta0', 0.0)),
        eta=_vector(L, 'eta', n_times), beta1=_vector(L, 'beta1', k),
        beta1_star=_vector(L, 'beta1_star', k), beta2=_vector(L, 'beta2', p),
        beta2_star=_vector(L, 'beta2_star', p),
        lambda_=_by_bank(L, 'lambda', bank_ids),
        residuals=np.array(list((L.get('residuals') or {}).values()), dtype=np.float64),
        bank_ids=bank_ids, years=years, regressors=regressors,
        converged=bool(lconv.get('converged', True)), n_iter=int(lconv.get('n_iter', 0)),
        objective=float(lconv.get('objective', 0.0)),
        grad_norm=float(lconv.get('grad_norm', 0.0)), start=lconv.get('start', ''))
    violations = set(S.get('positivity_violations', []))
    scale = ScaleFit(gamma0=float(S.get('gamma0', 0.0)),
        theta=_vector(S, 'theta', n_times), gamma1=_vector(S, 'gamma1', k),
        gamma1_star=_vector(S, 'gamma1_star', k), gamma2=_vector(S, 'gamma2', p),
        gamma2_star=_vector(S, 'gamma2_star', p),
        sigma=_by_bank(S, 'sigma', bank_ids),
        scale_values=np.array(list((S.get('scale_values') or {}).values()), dtype=np.float64),
        violations=tuple(i for i, key in enumerate(keys) if key in violations),
        bank_ids=bank_ids, years=years, regressors=regressors,
        converged=bool(sconv.get('converged', True)), n_iter=int(sconv.get('n_iter', 0)),
        objective=float(sconv.get('objective', 0.0)),
        grad_norm=float(sconv.get('grad_norm', 0.0)), start=sconv.get('start', ''))
    quantiles = {}
    for entry in doc.get('quantiles', []):
        tau = float(entry['tau'])
        quantiles[tau] = QuantileFit(tau=tau, q_tau=float(entry['q_tau']),
            location=location, scale=scale)
    return LocationScaleFit(location=location, scale=scale, quantiles=quantiles)


def save_fit(path, fit, design=None, normalize_prices=False):
    doc = fit_to_dict(fit, design=design, normalize_prices=normalize_prices)
    with open(path, 'w', encoding='utf-8') as handle:
        json.dump(doc, handle, indent=1)
        handle.write('\n')
    logger.info('wrote fit artifact %s', path)


def load_fit(path):
    if not os.path.isfile(path):
        raise ArtifactError('fit artifact not found: {} (run `qcost estimate` '
            'first)'.format(path))
    try:
        with open(path, encoding='utf-8') as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ArtifactError('{} is not valid JSON: {}'.format(path, exc))
    return fit_from_dict(doc)


def check_compatible(fit, design):
    '''The fit must describe the same banks, years and regressors as the design.'''
    loc = fit.location
    if tuple(loc.bank_ids) != tuple(design.bank_ids):
        raise ArtifactError('fit artifact was estimated on different banks')
    if tuple(loc.years) != tuple(design.years):
        raise ArtifactError('fit artifact covers years {}..{}, data {}..{}'.format(
            loc.years[0], loc.years[-1], design.years[0], design.years[-1]))
    if tuple(loc.regressors) != tuple(design.regressors):
        raise ArtifactError('fit artifact uses regressors {}, design {}'.format(
            ','.join(loc.regressors), ','.join(design.regressors)))
