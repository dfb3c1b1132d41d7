from qcost.inference.bootstrap import (BootstrapRun, ReplicaFit, bootstrap_pipeline,
    draw_weights, fingerprint)
from qcost.inference.dominance import (DominanceProblem, SdTestResult, dominance_matrix,
    ks_statistic, samples_from_frame, sd_test, subsampling_test)
from qcost.inference.intervals import (LABELS, BcInterval, Category, bc_interval,
    bc_intervals, classify, classify_arrays)
