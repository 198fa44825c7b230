"""Labeled BEV point-cloud samples

.. autosummary::
   :toctree:

   core
   synthetic
   kitti
   pbev

"""

from . import core
from . import kitti
from . import pbev
from . import synthetic
from .core import (
    CLASSES,
    MIN_POINTS,
    N_POINTS,
    VIEWS,
    DatasetSplit,
    Sample,
    cloud_mean,
    cloud_median,
    dataset_hash,
    filter_min_points,
    resample,
    resample_many,
    split_samples,
    stack_points,
)
from .kitti import KittiIngestError, ingest_kitti
from .pbev import PbevParseError, read_pbev, write_pbev
from .synthetic import SynthConfig, generate_synthetic, simulate_scan
