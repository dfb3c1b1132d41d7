from qcost.simulation.dgp import (INNOVATIONS, DgpSpec, GroundTruth, Simulation,
    draw_innovations, innovation_quantile, simulate_panel)
from qcost.simulation.oracles import (check_objective, oracle_fd_gradient, oracle_qreg_1d,
    oracle_quantile_by_simulation, within_ols)
