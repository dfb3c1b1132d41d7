'''
Wild residual block bootstrap of the whole location-scale pipeline.

Each replica draws one two-point weight per bank, rebuilds log cost from
the fitted location function plus the reweighted residual path of the
bank, and re-runs Steps 1-3. Replicas are a pure function of
(design, seed, replica index).
'''
import hashlib
import logging
import os
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from qcost.error import ArtifactError, BootstrapError, EstimationError
from qcost.estimators.location_scale import (LocationFit, OptimizerConfig, ScaleFit,
    estimate_location, estimate_scale, with_residuals)
from qcost.estimators.profile import WithinBlocks
from qcost.estimators.quantile import QuantileFit, estimate_q_tau
from qcost.utils import np_random, save_npz

logger = logging.getLogger(__name__)

SQRT5 = np.sqrt(5.0)
WEIGHT_HI = (1 + SQRT5) / 2
WEIGHT_LO = (1 - SQRT5) / 2
P_HI = (SQRT5 - 1) / (2 * SQRT5)

RESIDUAL_SOURCES = ('original', 'bootstrap')

_LOCATION_FIELDS = ('eta', 'beta1', 'beta1_star', 'beta2', 'beta2_star', 'lambda_')
_SCALE_FIELDS = ('theta', 'gamma1', 'gamma1_star', 'gamma2', 'gamma2_star', 'sigma')


def fingerprint(design, loc, sc):
    '''
    Digest of the estimation sample and the base fit a bootstrap run was
    drawn for: identifiers, regressors, log cost, log regressors and the
    stage coefficients.
    '''
    digest = hashlib.sha256()
    for label in (design.bank_ids, design.years, design.regressors):
        digest.update(repr(tuple(label)).encode('utf-8'))
    arrays = [design.c, design.v, design.group, design.t, [loc.beta0, sc.gamma0]]
    arrays += [getattr(loc, name) for name in _LOCATION_FIELDS]
    arrays += [getattr(sc, name) for name in _SCALE_FIELDS]
    for values in arrays:
        digest.update(np.ascontiguousarray(values, dtype=np.float64).tobytes())
    return digest.hexdigest()


def draw_weights(n, seed, replica):
    '''Per-bank two-point weights with mean 0 and variance 1.'''
    assert n >= 1, "need at least one bank"
    rng = np_random(seed, replica)
    return rng.choice(np.array([WEIGHT_HI, WEIGHT_LO]), size=n, p=[P_HI, 1 - P_HI])


@dataclass(frozen=True, eq=False)
class ReplicaFit:
    location: LocationFit
    scale: ScaleFit
    q_taus: dict

    def quantile_fit(self, tau):
        return QuantileFit(tau=float(tau), q_tau=self.q_taus[float(tau)],
            location=self.location, scale=self.scale)


@dataclass(eq=False)
class BootstrapRun:
    '''
    B replica fits; failed replicas are None and excluded from every
    replica-level quantity.
    '''
    B: int
    seed: int
    taus: tuple
    residual_source: str
    replicas: list = field(default_factory=list)
    fingerprint: str = ''

    @property
    def failed(self):
        return [b for b, r in enumerate(self.replicas) if r is None]

    @property
    def succeeded(self):
        return [r for r in self.replicas if r is not None]

    def matches(self, B, seed, taus, residual_source, fingerprint=None):
        '''Same settings and, when given, the same data and base fit.'''
        return (self.B == int(B) and self.seed == int(seed)
            and tuple(float(t) for t in taus) == self.taus
            and self.residual_source == residual_source
            and (fingerprint is None or self.fingerprint == fingerprint))

    def quantile_fits(self, tau):
        tau = float(tau)
        if tau not in self.taus:
            raise KeyError('bootstrap run has no replicas for tau={}'.format(tau))
        return [r.quantile_fit(tau) for r in self.succeeded]

    def parameter(self, stage, name):
        '''Stacked replica values of one coefficient, e.g. ("location", "beta1").'''
        return np.vstack([np.atleast_1d(getattr(getattr(r, stage), name))
            for r in self.succeeded])

    def save(self, path):
        ok = np.array([r is not None for r in self.replicas])
        template = self.succeeded[0] if ok.any() else None
        arrays = {'B': np.array(self.B), 'seed': np.array(self.seed),
            'taus': np.array(self.taus), 'ok': ok,
            'residual_source': np.array(self.residual_source),
            'fingerprint': np.array(self.fingerprint)}
        if template is not None:
            loc, sc = template.location, template.scale
            arrays['bank_ids'] = np.array(loc.bank_ids)
            arrays['years'] = np.array(loc.years)
            arrays['regressors'] = np.array(loc.regressors)

            def stacked(stage, name):
                out = np.full((self.B,) + np.shape(getattr(getattr(template, stage), name)),
                    np.nan)
                for b, r in enumerate(self.replicas):
                    if r is not None:
                        out[b] = getattr(getattr(r, stage), name)
                return out

            arrays['beta0'] = stacked('location', 'beta0')
            arrays['gamma0'] = stacked('scale', 'gamma0')
            for name in _LOCATION_FIELDS:
                arrays['location_' + name] = stacked('location', name)
            for name in _SCALE_FIELDS:
                arrays['scale_' + name] = stacked('scale', name)
            q = np.full((self.B, len(self.taus)), np.nan)
            for b, r in enumerate(self.replicas):
                if r is not None:
                    q[b] = [r.q_taus[t] for t in self.taus]
            arrays['q_taus'] = q
        save_npz(path, **arrays)
        logger.info('wrote %d bootstrap replicas to %s', self.B, path)

    @classmethod
    def load(cls, path):
        if not os.path.isfile(path):
            raise ArtifactError('bootstrap replicas not found: {}'.format(path))
        with np.load(path, allow_pickle=False) as data:
            B = int(data['B'])
            taus = tuple(float(t) for t in data['taus'])
            run = cls(B=B, seed=int(data['seed']), taus=taus,
                residual_source=str(data['residual_source']),
                fingerprint=str(data['fingerprint']) if 'fingerprint' in data.files else '')
            ok = data['ok']
            if not ok.any():
                run.replicas = [None] * B
                return run
            meta = dict(bank_ids=tuple(str(b) for b in data['bank_ids']),
                years=tuple(int(y) for y in data['years']),
                regressors=tuple(str(r) for r in data['regressors']))
            for b in range(B):
                if not ok[b]:
                    run.replicas.append(None)
                    continue
                loc = LocationFit(beta0=float(data['beta0'][b]), residuals=np.empty(0),
                    **{name: data['location_' + name][b] for name in _LOCATION_FIELDS},
                    **meta)
                sc = ScaleFit(gamma0=float(data['gamma0'][b]), scale_values=np.empty(0),
                    violations=(), **{name: data['scale_' + name][b] for name in _SCALE_FIELDS},
                    **meta)
                run.replicas.append(ReplicaFit(location=loc, scale=sc,
                    q_taus=dict(zip(taus, (float(q) for q in data['q_taus'][b])))))
        return run


def _replica(design, blocks, fitted, residuals, weights, taus, config, residual_source):
    c_b = fitted + weights[design.group] * residuals
    try:
        loc_b = estimate_location(design, config, blocks=blocks, y=c_b)
        if residual_source == 'original':
            loc_b = with_residuals(loc_b, design.c - (c_b - loc_b.residuals))
        sc_b = estimate_scale(design, loc_b.residuals, config, init=loc_b.eta,
            blocks=blocks)
        q_taus = {float(tau): estimate_q_tau(loc_b.residuals, sc_b.scale_values, tau)
            for tau in taus}
    except EstimationError as exc:
        logger.debug('replica failed: %s', exc)
        return None
    return ReplicaFit(location=loc_b, scale=sc_b, q_taus=q_taus)


def bootstrap_pipeline(design, loc, sc, taus, B=500, seed=0, optimizer_config=None,
        residual_source='original', weights_hook=None, n_jobs=1,
        failure_tolerance=0.05, progress=False, blocks=None):
    '''
    Re-estimate the location-scale model on B wild block bootstrap samples.

    Parameters
    ----------
    design : TranslogDesign
    loc, sc : LocationFit, ScaleFit
        Base fits; `loc.residuals` are the residuals that get reweighted.
    taus : iterable of float
    residual_source : {'original', 'bootstrap'}
        Replica residuals passed to Steps 2-3 are taken against the
        observed log cost ('original') or against the bootstrap outcome.
    weights_hook : callable, optional
        `hook(replica, weights) -> weights`, applied after drawing.
    failure_tolerance : float
        Largest admissible share of failed replicas.

    Returns
    -------
    BootstrapRun
    '''
    if residual_source not in RESIDUAL_SOURCES:
        raise ValueError('residual_source must be one of {}'.format(RESIDUAL_SOURCES))
    assert B >= 1, "need at least one replica"
    config = optimizer_config if optimizer_config is not None else OptimizerConfig()
    blocks = blocks if blocks is not None else WithinBlocks(design)
    taus = tuple(sorted(float(t) for t in taus))
    residuals = np.asarray(loc.residuals, dtype=np.float64)
    fitted = design.c - residuals

    def weights(b):
        w = draw_weights(design.n, seed, b)
        return weights_hook(b, w) if weights_hook is not None else w

    tasks = (delayed(_replica)(design, blocks, fitted, residuals, weights(b), taus,
        config, residual_source) for b in range(B))
    if progress:
        from tqdm import tqdm
        tasks = tqdm(tasks, total=B, desc='bootstrap')
    replicas = Parallel(n_jobs=n_jobs)(tasks)

    run = BootstrapRun(B=B, seed=int(seed), taus=taus, residual_source=residual_source,
        replicas=list(replicas), fingerprint=fingerprint(design, loc, sc))
    n_failed = len(run.failed)
    logger.info('bootstrap finished: %d of %d replicas succeeded', B - n_failed, B)
    if n_failed:
        logger.warning('%d bootstrap replicas failed and are excluded', n_failed)
    if n_failed > failure_tolerance * B:
        raise BootstrapError('{} of {} bootstrap replicas failed (tolerance {:.0%})'.format(
            n_failed, B, failure_tolerance))
    return run
