from qcost.estimators.estimator import DEFAULT_TAUS, LocationScaleEstimator, LocationScaleFit
from qcost.estimators.location_scale import (LocationFit, OptimizerConfig, ScaleFit,
    estimate_location, estimate_scale)
from qcost.estimators.profile import ProfiledBetas, WithinBlocks, profiled_sse
from qcost.estimators.quantile import (MEAN_EFFECT, QuantileFit, estimate_q_tau,
    fit_quantiles, predict_quantile, quantile_coefficients)
from qcost.estimators.serialize import check_compatible, fit_from_dict, load_fit, save_fit
