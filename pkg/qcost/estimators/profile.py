'''
Concentrated (profiled) sum of squared errors of the within-transformed
time-varying translog, as a function of the time-index vector alone.

For a given index vector eta the inner coefficients on

    [v, 0.5*vquad, L*v, 0.5*L*vquad],   L_it = eta_t  (eta_1 = 0)

solve a linear least-squares problem against y - L, all columns demeaned
within bank. `WithinBlocks` holds the demeaned blocks and their Gram
matrix for one design; `ProfiledObjective` binds them to a dependent
variable.
'''
import logging
import warnings
from collections import namedtuple

import numpy as np
import scipy.linalg

from qcost.error import CollinearityError
from qcost.panel.design import group_means, within_transform

logger = logging.getLogger(__name__)

ProfiledBetas = namedtuple('ProfiledBetas',
    ['beta1', 'beta1_star', 'beta2', 'beta2_star'])

StageDecomposition = namedtuple('StageDecomposition',
    ['intercept', 'effects', 'residuals', 'fitted'])


class WithinBlocks:
    '''Demeaned regressor blocks of one design and their cross products.'''

    def __init__(self, design):
        self.design = design
        N, k = design.N, design.k
        A = np.hstack([design.v, 0.5 * design.vquad])
        self.k = k
        self.m = m = A.shape[1]
        self.n_times = n_times = design.T - 1
        self.A_raw = A
        self.A = within_transform(A, design.group)
        B = design.D[:, :, None] * A[:, None, :]
        self.B = within_transform(B.reshape(N, -1), design.group).reshape(N, n_times, m)
        self.D = within_transform(design.D, design.group)

        Z = np.hstack([self.A, self.B.reshape(N, -1), self.D])
        G = Z.T @ Z
        a = slice(0, m)
        b = slice(m, m + n_times * m)
        d = slice(m + n_times * m, m + n_times * m + n_times)
        self.Gaa = G[a, a]
        self.Gab = G[a, b].reshape(m, n_times, m)
        self.Gbb = G[b, b].reshape(n_times, m, n_times, m)
        self.Gad = G[a, d]
        self.Gbd = G[b, d].reshape(n_times, m, n_times)
        self.Gdd = G[d, d]

        base = tuple('v:' + name for name in design.regressors) + \
            tuple('vquad:' + name for name in design.quad_names)
        self.names = base + tuple('time*' + name for name in base)

    def objective(self, y, pinv_fallback=False):
        return ProfiledObjective(self, y, pinv_fallback=pinv_fallback)


class ProfiledObjective:

    def __init__(self, blocks, y, pinv_fallback=False):
        self.blocks = blocks
        self.pinv_fallback = pinv_fallback
        self.y_raw = np.asarray(y, dtype=np.float64)
        design = blocks.design
        assert self.y_raw.shape == (design.N,), "dependent variable has the wrong length"
        self.y = within_transform(self.y_raw, design.group)
        self.ray = blocks.A.T @ self.y
        self.rby = np.einsum('nkm,n->km', blocks.B, self.y)
        self.rdy = blocks.D.T @ self.y
        self.yy = self.y @ self.y

    # Fast path: normal equations assembled from the cached Gram blocks.
    def _normal_equations(self, eta):
        bl = self.blocks
        if not np.any(eta):
            return bl.Gaa, self.ray, self.yy
        AB = np.einsum('ikj,k->ij', bl.Gab, eta)
        BB = np.einsum('k,kilj,l->ij', eta, bl.Gbb, eta)
        XtX = np.block([[bl.Gaa, AB], [AB.T, BB]])
        Ay = self.ray - bl.Gad @ eta
        By = eta @ self.rby - np.einsum('k,kil,l->i', eta, bl.Gbd, eta)
        yy = self.yy - 2.0 * eta @ self.rdy + eta @ bl.Gdd @ eta
        return XtX, np.r_[Ay, By], yy

    def __call__(self, eta):
        eta = np.asarray(eta, dtype=np.float64)
        XtX, Xty, yy = self._normal_equations(eta)
        b = _solve_normal(XtX, Xty)
        return max(yy - b @ Xty, 0.0)

    # Exact path: explicit regressor matrix.
    def regressors(self, eta):
        if not np.any(eta):
            return self.blocks.A
        return np.hstack([self.blocks.A, np.einsum('nkm,k->nm', self.blocks.B, eta)])

    def dependent(self, eta):
        return self.y - self.blocks.D @ eta

    def residuals(self, eta):
        eta = np.asarray(eta, dtype=np.float64)
        X = self.regressors(eta)
        y = self.dependent(eta)
        b = np.linalg.lstsq(X, y, rcond=None)[0]
        return y - X @ b

    def solve(self, eta):
        '''
        Exact objective and inner coefficients at `eta`, checking the
        inner system for rank deficiency.
        '''
        eta = np.asarray(eta, dtype=np.float64)
        assert eta.shape == (self.blocks.n_times,), \
            "eta must have length T-1 = {}".format(self.blocks.n_times)
        X = self.regressors(eta)
        y = self.dependent(eta)
        deficient = _collinear_columns(X)
        if deficient:
            names = [self.blocks.names[j] for j in deficient]
            if not self.pinv_fallback:
                raise CollinearityError(names)
            logger.warning('rank-deficient inner system, using the minimum-norm '
                'solution; collinear columns: %s', ', '.join(names))
        b = np.linalg.lstsq(X, y, rcond=None)[0]
        r = y - X @ b
        return float(r @ r), self._split(b)

    def _split(self, b):
        k, m = self.blocks.k, self.blocks.m
        if len(b) == m:
            b = np.r_[b, np.zeros(m)]
        return ProfiledBetas(beta1=b[:k], beta2=b[k:m],
            beta1_star=b[m:m + k], beta2_star=b[m + k:])

    def decompose(self, eta, betas):
        '''
        Intercept, bank effects, residuals and fitted values in levels.
        The intercept is the average of the bank means so that the effects
        sum to zero on unbalanced panels as well.
        '''
        design = self.blocks.design
        A = self.blocks.A_raw
        L = design.D @ eta
        slopes = A @ np.r_[betas.beta1, betas.beta2] + \
            L * (A @ np.r_[betas.beta1_star, betas.beta2_star])
        e = self.y_raw - L - slopes
        means = group_means(e, design.group)
        bank_means = np.zeros(design.n)
        bank_means[design.group] = means
        intercept = bank_means.mean()
        effects = bank_means - intercept
        residuals = e - means
        return StageDecomposition(intercept=float(intercept), effects=effects,
            residuals=residuals, fitted=self.y_raw - residuals)


def _solve_normal(XtX, Xty):
    d = np.sqrt(np.diag(XtX))
    d[d == 0] = 1.0
    S = XtX / np.outer(d, d)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', scipy.linalg.LinAlgWarning)
        try:
            x = scipy.linalg.solve(S, Xty / d, assume_a='pos')
        except np.linalg.LinAlgError:
            x = np.linalg.lstsq(S, Xty / d, rcond=None)[0]
    return x / d


def _collinear_columns(X):
    if X.shape[1] == 0:
        return []
    _, R, piv = scipy.linalg.qr(X, mode='economic', pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0:
        return sorted(piv.tolist())
    tol = diag[0] * max(X.shape) * np.finfo(np.float64).eps
    rank = int((diag > tol).sum())
    return sorted(piv[rank:].tolist())


def profiled_sse(eta, design, y=None, pinv_fallback=False):
    '''
    Concentrated within-transformed SSE at `eta` and the profiled inner
    coefficients (beta1, beta1_star, beta2, beta2_star).

    At eta = 0 the time-interacted block vanishes and its coefficients are
    reported as zero; the objective is then the plain within-OLS residual
    sum of squares.
    '''
    eta = np.asarray(eta, dtype=np.float64)
    if eta.shape != (design.T - 1,):
        raise ValueError('eta must have length T-1 = {}, got {}'.format(
            design.T - 1, eta.shape))
    objective = WithinBlocks(design).objective(
        design.c if y is None else y, pinv_fallback=pinv_fallback)
    return objective.solve(eta)
