"""Network and training configuration

"""

import math
from fractions import Fraction
from typing import Dict, List

import attr

from bevbox.dataset.core import N_POINTS


ANGLE_MODES = ("direct_theta", "sincos", "sincos2")
CENTER_MODES = ("none", "mean", "median")
LOSS_KINDS = ("mse", "huber")

SHARED_WIDTHS = (64, 128, 1024)
HEAD_WIDTHS = (512, 128)
HEADS = ("angle", "size", "center")


def parse_scale(value) -> float:
    """Scale from a number or a fraction string such as ``"1/16"``

    """
    return float(Fraction(value)) if isinstance(value, str) else float(value)


def parse_flag(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("on", "true", "1", "yes"):
        return True
    if text in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"Not an on/off value: {value!r}")


def _weights(value) -> tuple:
    if isinstance(value, str):
        value = value.split(",")
    return tuple(float(v) for v in value)


@attr.s(frozen=True)
class NetworkConfig:
    """Architecture and loss settings of the box regressor

    Parameters
    ----------
    angle_mode : str
        Orientation encoding: ``direct_theta`` (θ), ``sincos``
        (cos θ, sin θ) or ``sincos2`` (cos 2θ, sin 2θ)
    center_mode : str
        Cloud center subtracted before feature extraction: ``none``,
        ``mean`` or ``median``
    concat_enabled : bool
        Feed the angle and size outputs into the center head
    scale : float
        Layer-width multiplier in ``(0, 1]``; widths of one or less remove
        the layer
    loss_kind : str
        ``mse`` or ``huber``
    huber_delta : float
        Huber transition point
    loss_weights : Tuple[float, float, float]
        Weights of the angle, size and center terms
    n_points : int
        Points per input cloud

    """

    angle_mode = attr.ib(default="sincos2", validator=attr.validators.in_(ANGLE_MODES))
    center_mode = attr.ib(default="mean", validator=attr.validators.in_(CENTER_MODES))
    concat_enabled = attr.ib(default=True, converter=parse_flag)
    scale = attr.ib(default=1.0, converter=parse_scale)
    loss_kind = attr.ib(default="mse", validator=attr.validators.in_(LOSS_KINDS))
    huber_delta = attr.ib(default=1.0, converter=float)
    loss_weights = attr.ib(default=(1.0, 2.0, 1.0), converter=_weights)
    n_points = attr.ib(default=N_POINTS, converter=int)

    @scale.validator
    def _check_scale(self, attribute, value):
        if not 0 < value <= 1:
            raise ValueError(f"scale must lie in (0, 1], got {value}")

    @huber_delta.validator
    def _check_delta(self, attribute, value):
        if not value > 0:
            raise ValueError(f"huber_delta must be positive, got {value}")

    @loss_weights.validator
    def _check_weights(self, attribute, value):
        if len(value) != 3 or any(not (w >= 0 and math.isfinite(w)) for w in value):
            raise ValueError(f"loss_weights must be three non-negative numbers, got {value}")

    @n_points.validator
    def _check_n_points(self, attribute, value):
        if value < 1:
            raise ValueError(f"n_points must be positive, got {value}")

    @property
    def angle_dim(self) -> int:
        return 1 if self.angle_mode == "direct_theta" else 2

    @classmethod
    def from_pairs(cls, pairs: Dict[str, str]) -> "NetworkConfig":
        """Rebuild from the text pairs written by :func:`bevbox.utils.flatten_config`

        """
        known = {a.name for a in attr.fields(cls)}
        unknown = set(pairs) - known
        if unknown:
            raise ValueError(f"Unknown network config fields: {sorted(unknown)}")
        return cls(**pairs)


@attr.s(frozen=True)
class TrainConfig:
    """Optimization schedule

    The learning rate decays continuously as
    ``lr0 * lr_decay_rate ** (step / lr_decay_steps)`` and the batch-norm
    running-statistics momentum grows from ``bn_decay_start`` towards
    ``bn_decay_end``.

    """

    batch_size = attr.ib(default=32, converter=int)
    epochs = attr.ib(default=400, converter=int)
    lr0 = attr.ib(default=0.005, converter=float)
    lr_decay_rate = attr.ib(default=0.7, converter=float)
    lr_decay_steps = attr.ib(default=250000, converter=int)
    bn_decay_start = attr.ib(default=0.5, converter=float)
    bn_decay_end = attr.ib(default=0.99, converter=float)
    bn_decay_steps = attr.ib(default=250000, converter=int)
    beta1 = attr.ib(default=0.9, converter=float)
    beta2 = attr.ib(default=0.999, converter=float)
    adam_eps = attr.ib(default=1e-8, converter=float)
    val_fraction = attr.ib(default=0.1, converter=float)
    seed = attr.ib(default=0, converter=int)

    @batch_size.validator
    def _check_batch(self, attribute, value):
        if value < 1:
            raise ValueError(f"batch_size must be positive, got {value}")

    @epochs.validator
    def _check_epochs(self, attribute, value):
        if value < 0:
            raise ValueError(f"epochs must be non-negative, got {value}")

    @lr_decay_steps.validator
    def _check_decay_steps(self, attribute, value):
        if value < 1:
            raise ValueError(f"lr_decay_steps must be positive, got {value}")

    @bn_decay_steps.validator
    def _check_bn_steps(self, attribute, value):
        if value < 1:
            raise ValueError(f"bn_decay_steps must be positive, got {value}")

    @bn_decay_end.validator
    def _check_bn_decay(self, attribute, value):
        if not 0 < self.bn_decay_start <= value < 1:
            raise ValueError(
                "batch-norm decay must satisfy 0 < start <= end < 1, got "
                f"{self.bn_decay_start} and {value}"
            )

    @val_fraction.validator
    def _check_val_fraction(self, attribute, value):
        if not 0 <= value < 1:
            raise ValueError(f"val_fraction must lie in [0, 1), got {value}")


#
# Layer layout
# ~~~~~~~~~~~~
#


@attr.s(frozen=True)
class LayerSpec:
    """One fully connected layer

    Hidden layers are batch-normalized and rectified; the last layer of each
    head has a bias and the head's output activation instead.

    """

    name = attr.ib()
    n_in = attr.ib()
    n_out = attr.ib()
    batch_norm = attr.ib()
    activation = attr.ib()

    @property
    def param_shapes(self) -> Dict[str, tuple]:
        shapes = {"W": (self.n_in, self.n_out)}
        if self.batch_norm:
            shapes.update({
                name: (1, self.n_out)
                for name in ("gamma", "beta", "running_mean", "running_var")
            })
        else:
            shapes["b"] = (1, self.n_out)
        return {
            "{0}.{1}".format(self.name, key): shape for (key, shape) in shapes.items()
        }


def scaled_widths(widths, scale: float) -> List[int]:
    """Shrink layer widths, dropping layers whose width falls to one or less

    Examples
    --------

    .. code-block:: python

        scaled_widths((64, 128, 1024), 1 / 16)
        # [4, 8, 64]

    """
    scaled = [int(math.floor(w * scale + 1e-9)) for w in widths]
    return [w for w in scaled if w > 1]


OUTPUT_ACTIVATIONS = {
    "angle": "tanh",
    "size": "relu",
    "center": "identity",
}


def build_layout(cfg: NetworkConfig) -> Dict[str, List[LayerSpec]]:
    """Layer stacks of the shared extractor and the three heads

    """
    layout = {"shared": []}
    n_in = 2
    for (i, width) in enumerate(scaled_widths(SHARED_WIDTHS, cfg.scale)):
        layout["shared"].append(LayerSpec(f"shared{i}", n_in, width, True, "relu"))
        n_in = width
    feature_dim = n_in
    head_inputs = {
        "angle": feature_dim,
        "size": feature_dim,
        "center": feature_dim + (cfg.angle_dim + 2 if cfg.concat_enabled else 0),
    }
    head_outputs = {"angle": cfg.angle_dim, "size": 2, "center": 2}
    hidden = scaled_widths(HEAD_WIDTHS, cfg.scale)
    for head in HEADS:
        stack = []
        n_in = head_inputs[head]
        for (i, width) in enumerate(hidden):
            stack.append(LayerSpec(f"{head}{i}", n_in, width, True, "relu"))
            n_in = width
        activation = OUTPUT_ACTIVATIONS[head]
        if head == "angle" and cfg.angle_mode == "direct_theta":
            # tanh cannot reach angles beyond one radian
            activation = "identity"
        stack.append(LayerSpec(f"{head}_out", n_in, head_outputs[head], False, activation))
        layout[head] = stack
    return layout


def feature_dim(layout: Dict[str, List[LayerSpec]]) -> int:
    return layout["shared"][-1].n_out if layout["shared"] else 2


def param_shapes(cfg: NetworkConfig) -> Dict[str, tuple]:
    """Names and shapes of every parameter tensor, in a fixed order

    """
    shapes = {}
    for stack in build_layout(cfg).values():
        for spec in stack:
            shapes.update(spec.param_shapes)
    return shapes
