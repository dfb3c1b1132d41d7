import logging

from qcost import error
from qcost.version import VERSION as __version__
from qcost.utils import *

from qcost.measures import make, spec, register
from qcost import panel, estimators, inference, measures, simulation

logging.getLogger(__name__).addHandler(logging.NullHandler())
