"""BoxNet: shared point MLP, global max pool and three regression heads

A cloud of ``N`` BEV points is centered on its mean (or median), lifted point
by point through a shared MLP, max-pooled into one global feature and fed to
three fully connected heads regressing the orientation encoding, the box size
``(w, l)`` and the box center relative to the cloud center.

"""

from typing import Dict, List

import attr
import numpy as np

from bevbox.geometry import OrientedBox, normalize_angle
from bevbox.network import layers
from bevbox.network.config import HEADS, NetworkConfig, build_layout, feature_dim


MIN_SIZE = 1e-3
"""Lower bound of predicted widths and lengths in meters"""

SIZE_BIAS_INIT = 1.0
"""Initial bias of the size output, keeps the rectified outputs alive"""


class ForwardError(ValueError):
    """Invalid network input or misuse of a forward cache"""


class DegenerateAngleError(ValueError):
    """The angle encoding is the zero vector"""


#
# Parameters
# ~~~~~~~~~~
#


@attr.s
class NetworkParams:
    """Parameter tensors and the global optimizer step

    Every tensor is two-dimensional; per-channel vectors have shape
    ``(1, C)``. Names are ``<layer>.<kind>`` with kind one of ``W``, ``b``,
    ``gamma``, ``beta``, ``running_mean`` and ``running_var``.

    """

    tensors = attr.ib(factory=dict)
    step = attr.ib(default=0, converter=int)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            tensors={name: t.copy() for (name, t) in self.tensors.items()},
            step=self.step
        )

    def trainable(self) -> List[str]:
        """Names of the tensors the optimizer updates"""
        return [
            name for name in self.tensors
            if not name.endswith((".running_mean", ".running_var"))
        ]

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in self.tensors.values())


def init_params(cfg: NetworkConfig, seed: int = 0) -> NetworkParams:
    """Fresh parameters

    Weights are drawn uniformly from ``±1/sqrt(fan_in)``; biases and
    batch-norm shifts start at zero, scales and running variances at one.
    The size output bias starts at :data:`SIZE_BIAS_INIT`.

    """
    rng = np.random.default_rng(seed)
    tensors = {}
    for stack in build_layout(cfg).values():
        for spec in stack:
            for (name, shape) in spec.param_shapes.items():
                kind = name.rsplit(".", 1)[1]
                if kind == "W":
                    bound = 1.0 / np.sqrt(spec.n_in)
                    tensors[name] = rng.uniform(-bound, bound, size=shape)
                elif kind in ("gamma", "running_var"):
                    tensors[name] = np.ones(shape)
                elif name == "size_out.b":
                    tensors[name] = np.full(shape, SIZE_BIAS_INIT)
                else:
                    tensors[name] = np.zeros(shape)
    return NetworkParams(tensors=tensors, step=0)


#
# Angle encoding
# ~~~~~~~~~~~~~~
#


def encode_angle(theta, angle_mode: str) -> np.ndarray:
    """Regression target of orientations

    Returns a ``(B, 1)`` array ``[θ]`` for ``direct_theta`` and ``(B, 2)``
    arrays ``[cos θ, sin θ]`` or ``[cos 2θ, sin 2θ]`` otherwise.

    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if angle_mode == "direct_theta":
        return theta[:, None]
    k = 1.0 if angle_mode == "sincos" else 2.0
    if angle_mode not in ("sincos", "sincos2"):
        raise ValueError(f"Unknown angle mode: {angle_mode}")
    return np.stack([np.cos(k * theta), np.sin(k * theta)], axis=1)


def recover_theta(angle_enc, angle_mode: str) -> float:
    """Orientation in ``(-π/2, π/2]`` from one angle encoding

    Examples
    --------

    .. code-block:: python

        recover_theta([0.0, 1.0], "sincos2")
        # 0.7853981633974483

    """
    enc = np.asarray(angle_enc, dtype=float).ravel()
    if not np.all(np.isfinite(enc)):
        raise DegenerateAngleError(f"Non-finite angle encoding {enc}")
    if angle_mode == "direct_theta":
        return normalize_angle(float(enc[0]))
    (c, s) = (float(enc[0]), float(enc[1]))
    if c == 0.0 and s == 0.0:
        raise DegenerateAngleError("Angle encoding (0, 0) has no direction")
    if angle_mode == "sincos":
        return normalize_angle(np.arctan2(s, c))
    if angle_mode == "sincos2":
        theta = 0.5 * np.arctan2(s, c)
        # atan2(-0.0, c) with c < 0 is -π
        return float(np.pi / 2) if theta == -np.pi / 2 else float(theta)
    raise ValueError(f"Unknown angle mode: {angle_mode}")


#
# Outputs and targets
# ~~~~~~~~~~~~~~~~~~~
#


@attr.s
class HeadOutputs:
    """Batched values of the three heads

    The same container carries predictions, regression targets and the
    gradients of a loss with respect to the predictions.

    Parameters
    ----------
    angle : np.ndarray
        ``(B, 1)`` or ``(B, 2)`` orientation encodings
    size : np.ndarray
        ``(B, 2)`` widths and lengths
    center : np.ndarray
        ``(B, 2)`` box centers relative to the cloud centers

    """

    angle = attr.ib()
    size = attr.ib()
    center = attr.ib()

    def __getitem__(self, index) -> "HeadOutputs":
        return HeadOutputs(self.angle[index], self.size[index], self.center[index])

    def as_tuple(self):
        return (self.angle, self.size, self.center)


def canonicalize(X: np.ndarray) -> np.ndarray:
    """Sort the points of each cloud lexicographically by ``(x, y)``

    Every later reduction then sees the same point order no matter how the
    input was permuted.

    """
    order = np.lexsort((X[..., 1], X[..., 0]), axis=-1)
    return np.take_along_axis(X, order[..., None], axis=1)


def cloud_centers(X: np.ndarray, center_mode: str) -> np.ndarray:
    """``(B, 2)`` centers subtracted from each cloud

    """
    if center_mode == "none":
        return np.zeros((X.shape[0], 2))
    if center_mode == "mean":
        return X.mean(axis=1)
    if center_mode == "median":
        return np.median(X, axis=1)
    raise ValueError(f"Unknown center mode: {center_mode}")


def make_targets(X: np.ndarray, boxes: List[OrientedBox], cfg: NetworkConfig) -> HeadOutputs:
    """Regression targets of resampled clouds and their ground-truth boxes

    Parameters
    ----------
    X : np.ndarray
        ``(B, N, 2)`` clouds
    boxes : List[OrientedBox]
        Ground truth, one per cloud

    """
    centers = cloud_centers(canonicalize(np.asarray(X, dtype=float)), cfg.center_mode)
    gt = np.array([b.to_array() for b in boxes]).reshape(-1, 5)
    return HeadOutputs(
        angle=encode_angle(gt[:, 4], cfg.angle_mode),
        size=gt[:, [2, 3]],
        center=gt[:, :2] - centers
    )


#
# Forward
# ~~~~~~~
#


@attr.s
class ForwardCache:
    """Intermediate values of one forward pass

    ``batch_stats`` holds the batch means and variances of every batch-norm
    layer in train mode; :func:`apply_running_stats` folds them into the
    running statistics.

    """

    mode = attr.ib()
    centers = attr.ib()
    n_points = attr.ib()
    argmax = attr.ib(default=None)
    layers = attr.ib(factory=dict)
    batch_stats = attr.ib(factory=dict)


def _check_input(X, cfg: NetworkConfig) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 3 or X.shape[2] != 2:
        raise ForwardError(f"Expected a (B, N, 2) batch, got shape {X.shape}")
    if X.shape[0] == 0:
        raise ForwardError("Empty batch")
    if X.shape[1] != cfg.n_points:
        raise ForwardError(f"Expected {cfg.n_points} points per cloud, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ForwardError("Non-finite point coordinates")
    return X


def _forward_stack(params: NetworkParams, stack, A: np.ndarray, mode: str, cache: ForwardCache):
    for spec in stack:
        p = f"{spec.name}."
        if spec.batch_norm:
            U = layers.dense_forward(A, params[p + "W"])
            if mode == "train":
                (Z, bn_cache, stats) = layers.batchnorm_forward_train(
                    U, params[p + "gamma"], params[p + "beta"]
                )
                cache.batch_stats[spec.name] = stats
            else:
                Z = layers.batchnorm_forward_infer(
                    U, params[p + "gamma"], params[p + "beta"],
                    params[p + "running_mean"], params[p + "running_var"]
                )
                bn_cache = None
        else:
            Z = layers.dense_forward(A, params[p + "W"], params[p + "b"])
            bn_cache = None
        Y = layers.activation_forward(spec.activation, Z)
        if mode == "train":
            cache.layers[spec.name] = (A, bn_cache, Z, Y)
        A = Y
    return A


def forward(params: NetworkParams, cfg: NetworkConfig, X, mode: str = "train"):
    """Run the network on a batch of clouds

    Parameters
    ----------
    params : NetworkParams
        Network parameters, left untouched
    cfg : NetworkConfig
        Architecture matching ``params``
    X : array_like
        ``(B, N, 2)`` clouds with ``N == cfg.n_points``
    mode : str
        ``train`` normalizes with batch statistics and records everything
        :func:`backward` needs; ``infer`` uses the running statistics

    Returns
    -------
    predictions : HeadOutputs
        Raw head outputs
    cache : ForwardCache
        Intermediate values and the cloud centers

    """
    if mode not in ("train", "infer"):
        raise ValueError(f"Unknown forward mode: {mode}")
    X = canonicalize(_check_input(X, cfg))
    (B, N) = X.shape[:2]
    layout = build_layout(cfg)
    centers = cloud_centers(X, cfg.center_mode)
    cache = ForwardCache(mode=mode, centers=centers, n_points=N)

    A = (X - centers[:, None, :]).reshape(B * N, 2)
    H = _forward_stack(params, layout["shared"], A, mode, cache)
    (G, cache.argmax) = layers.maxpool_forward(H.reshape(B, N, -1))

    angle = _forward_stack(params, layout["angle"], G, mode, cache)
    size = _forward_stack(params, layout["size"], G, mode, cache)
    center_in = np.concatenate([G, angle, size], axis=1) if cfg.concat_enabled else G
    center = _forward_stack(params, layout["center"], center_in, mode, cache)
    return (HeadOutputs(angle, size, center), cache)


def apply_running_stats(params: NetworkParams, cache: ForwardCache, momentum: float) -> NetworkParams:
    """Fold the batch statistics of a train-mode pass into new parameters

    ``running = momentum * running + (1 - momentum) * batch``

    """
    new = params.copy()
    for (name, (mean, var)) in cache.batch_stats.items():
        for (kind, value) in (("running_mean", mean), ("running_var", var)):
            key = f"{name}.{kind}"
            new.tensors[key] = momentum * params[key] + (1.0 - momentum) * value
    return new


#
# Backward
# ~~~~~~~~
#


def _backward_stack(params: NetworkParams, stack, dA: np.ndarray, cache: ForwardCache, grads: Dict):
    for spec in reversed(stack):
        p = f"{spec.name}."
        (A, bn_cache, Z, Y) = cache.layers[spec.name]
        dZ = layers.activation_backward(spec.activation, dA, Z, Y)
        if spec.batch_norm:
            (dZ, grads[p + "gamma"], grads[p + "beta"]) = layers.batchnorm_backward(
                dZ, bn_cache, params[p + "gamma"]
            )
            (dA, grads[p + "W"], _) = layers.dense_backward(dZ, A, params[p + "W"])
        else:
            (dA, grads[p + "W"], grads[p + "b"]) = layers.dense_backward(dZ, A, params[p + "W"])
    return dA


def backward(
        params: NetworkParams,
        cfg: NetworkConfig,
        cache: ForwardCache,
        d_outputs: HeadOutputs
) -> Dict[str, np.ndarray]:
    """Exact parameter gradients from gradients of the head outputs

    Parameters
    ----------
    params : NetworkParams
        Parameters used in the forward pass
    cfg : NetworkConfig
        Architecture
    cache : ForwardCache
        Cache of a train-mode :func:`forward`
    d_outputs : HeadOutputs
        Gradients of the loss with respect to the predictions

    Returns
    -------
    Dict[str, np.ndarray]
        One gradient per trainable tensor

    """
    if cache.mode != "train":
        raise ForwardError("backward needs the cache of a train-mode forward pass")
    layout = build_layout(cfg)
    grads = {}

    d_center_in = _backward_stack(params, layout["center"], d_outputs.center, cache, grads)
    if cfg.concat_enabled:
        F = feature_dim(layout)
        k = cfg.angle_dim
        dG = d_center_in[:, :F]
        d_angle = d_outputs.angle + d_center_in[:, F:F + k]
        d_size = d_outputs.size + d_center_in[:, F + k:]
    else:
        (dG, d_angle, d_size) = (d_center_in, d_outputs.angle, d_outputs.size)
    dG = (
        dG +
        _backward_stack(params, layout["angle"], d_angle, cache, grads) +
        _backward_stack(params, layout["size"], d_size, cache, grads)
    )

    dH = layers.maxpool_backward(dG, cache.argmax, cache.n_points)
    _backward_stack(params, layout["shared"], dH.reshape(-1, dH.shape[2]), cache, grads)
    return {name: grads[name] for name in params.trainable()}


#
# Prediction
# ~~~~~~~~~~
#


def decode(predictions: HeadOutputs, centers: np.ndarray, cfg: NetworkConfig) -> List[OrientedBox]:
    """Boxes from head outputs and the cloud centers

    """
    sizes = np.maximum(predictions.size, MIN_SIZE)
    absolute = predictions.center + centers
    return [
        OrientedBox(
            cx=float(absolute[i, 0]),
            cy=float(absolute[i, 1]),
            w=float(sizes[i, 0]),
            l=float(sizes[i, 1]),
            theta=recover_theta(predictions.angle[i], cfg.angle_mode)
        )
        for i in range(len(sizes))
    ]


def predict_batch(params: NetworkParams, cfg: NetworkConfig, X) -> List[OrientedBox]:
    """Boxes of a ``(B, N, 2)`` batch in inference mode

    """
    (predictions, cache) = forward(params, cfg, X, mode="infer")
    return decode(predictions, cache.centers, cfg)


def predict(params: NetworkParams, cfg: NetworkConfig, cloud) -> OrientedBox:
    """Box of one ``(N, 2)`` cloud in inference mode

    """
    cloud = np.asarray(cloud, dtype=float)
    if cloud.ndim != 2:
        raise ForwardError(f"Expected an (N, 2) cloud, got shape {cloud.shape}")
    return predict_batch(params, cfg, cloud[None])[0]


def head_names(cfg: NetworkConfig) -> Dict[str, List[str]]:
    """Trainable parameter names per stack"""
    return {
        stack: [
            name for spec in specs for name in spec.param_shapes
            if not name.endswith((".running_mean", ".running_var"))
        ]
        for (stack, specs) in build_layout(cfg).items()
    }


__all__ = [
    "HEADS",
    "ForwardError",
    "DegenerateAngleError",
    "NetworkParams",
    "HeadOutputs",
    "init_params",
    "encode_angle",
    "recover_theta",
    "make_targets",
    "forward",
    "backward",
    "apply_running_stats",
    "predict",
    "predict_batch",
]
