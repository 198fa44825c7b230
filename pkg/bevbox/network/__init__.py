"""BoxNet box regression network

.. autosummary::
   :toctree:

   config
   layers
   model
   loss
   optim
   checkpoint
   train

"""

from . import checkpoint
from . import config
from . import layers
from . import loss
from . import model
from . import optim
from . import train
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import NetworkConfig, TrainConfig, build_layout, scaled_widths
from .model import (
    DegenerateAngleError,
    ForwardError,
    HeadOutputs,
    NetworkParams,
    apply_running_stats,
    backward,
    encode_angle,
    forward,
    init_params,
    make_targets,
    predict,
    predict_batch,
    recover_theta,
)
from .optim import NonFiniteGradientError, adam_step, bn_momentum, learning_rate
from .train import EmptyDatasetError, EpochRecord, evaluation_loss
