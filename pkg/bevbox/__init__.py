"""Importable modules in the package

.. autosummary::
   :toctree: _autosummary

   geometry
   dataset
   slf
   network
   harness
   cli
   utils

"""

from .__version__ import (
    __author__,
    __copyright__,
    __description__,
    __license__,
    __title__,
    __url__,
    __version__
)

from . import dataset
from . import geometry
from . import harness
from . import network
from . import slf
from . import utils
from .geometry import OrientedBox, Point2, center_error, iou, orientation_error
from .harness import BoxNetEstimator, EvalReport, SlfEstimator, evaluate
from .slf import SlfConfig, slf_fit
