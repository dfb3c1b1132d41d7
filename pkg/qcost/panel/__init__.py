from qcost.panel.dataset import (CANONICAL, DEFAULT_SCHEMA, OUTPUTS, REGRESSORS,
    PanelDataset, load_panel)
from qcost.panel.design import (Observation, TranslogDesign, build_design,
    group_means, quad_expand, quad_matrix, within_transform)
