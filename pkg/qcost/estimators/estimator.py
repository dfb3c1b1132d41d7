import logging
from dataclasses import dataclass

from qcost.estimators.location_scale import (OptimizerConfig, estimate_location, estimate_scale,
    require_panel)
from qcost.estimators.profile import WithinBlocks
from qcost.estimators.quantile import fit_quantiles
from qcost.utils import assign_config

logger = logging.getLogger(__name__)

DEFAULT_TAUS = (0.10, 0.25, 0.50, 0.75, 0.90)


@dataclass(frozen=True, eq=False)
class LocationScaleFit:
    location: object
    scale: object
    quantiles: dict

    @property
    def taus(self):
        return tuple(sorted(self.quantiles))


class LocationScaleEstimator:
    '''
    Three-step panel location-scale quantile estimator.

    Step 1 fits the location function by profiled within-transformed
    nonlinear least squares, Step 2 fits the scale function on absolute
    Step-1 residuals, Step 3 solves for the innovation quantile of each
    tau exactly.

    Settings:
        taus: quantile levels (default 0.10, 0.25, 0.50, 0.75, 0.90)
        ftol, gtol, xtol, max_iter, polish, pinv_fallback: passed to
            OptimizerConfig
    '''
    def __init__(self, *args, **kwargs):
        self.taus = list(DEFAULT_TAUS)
        self.ftol = 1e-10
        self.gtol = 1e-8
        self.xtol = 1e-8
        self.max_iter = 500
        self.polish = True
        self.pinv_fallback = False
        assign_config(self, kwargs)
        assert all(0 < tau < 1 for tau in self.taus), "taus must lie in (0, 1)"

    @property
    def optimizer_config(self):
        return OptimizerConfig(ftol=self.ftol, gtol=self.gtol, xtol=self.xtol,
            max_iter=self.max_iter, polish=self.polish,
            pinv_fallback=self.pinv_fallback)

    def fit(self, design, blocks=None):
        config = self.optimizer_config
        require_panel(design)
        blocks = blocks if blocks is not None else WithinBlocks(design)
        loc = estimate_location(design, config, blocks=blocks)
        sc = estimate_scale(design, loc.residuals, config, init=loc.eta, blocks=blocks)
        quantiles = fit_quantiles(loc, sc, self.taus)
        for tau, qfit in sorted(quantiles.items()):
            logger.info('tau=%.3f: q_tau=%.6g', tau, qfit.q_tau)
        return LocationScaleFit(location=loc, scale=sc, quantiles=quantiles)
