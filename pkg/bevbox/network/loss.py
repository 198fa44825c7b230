"""Weighted multi-head regression loss

``w0 L(angle) + w1 L(size) + w2 L(center)`` where ``L`` averages a pointwise
penalty over the batch and the components of a head.

"""

from typing import Tuple

import numpy as np

from bevbox.network.config import NetworkConfig
from bevbox.network.model import HeadOutputs


def squared_error(residual: np.ndarray, delta: float = None):
    """Pointwise squared error and its derivative"""
    return (residual ** 2, 2.0 * residual)


def huber(residual: np.ndarray, delta: float = 1.0):
    """Pointwise Huber penalty and its derivative

    Quadratic ``r²/2`` within ``|r| <= delta`` and linear beyond.

    """
    a = np.abs(residual)
    quadratic = a <= delta
    value = np.where(quadratic, 0.5 * residual ** 2, delta * (a - 0.5 * delta))
    grad = np.where(quadratic, residual, delta * np.sign(residual))
    return (value, grad)


PENALTIES = {
    "mse": squared_error,
    "huber": huber,
}


def head_loss(pred: np.ndarray, target: np.ndarray, kind: str = "mse", delta: float = 1.0):
    """Mean penalty of one head and its gradient with respect to ``pred``

    """
    if pred.shape != target.shape:
        raise ValueError(f"Shape mismatch: {pred.shape} vs {target.shape}")
    (value, grad) = PENALTIES[kind](pred - target, delta)
    return (float(value.mean()), grad / pred.size)


def loss(
        predictions: HeadOutputs,
        targets: HeadOutputs,
        cfg: NetworkConfig,
        kind: str = None
) -> Tuple[float, HeadOutputs]:
    """Weighted loss and its gradient with respect to the predictions

    Parameters
    ----------
    predictions : HeadOutputs
        Network outputs
    targets : HeadOutputs
        Regression targets of the same shapes
    cfg : NetworkConfig
        Supplies ``loss_weights``, ``loss_kind`` and ``huber_delta``
    kind : str
        Override of ``cfg.loss_kind``

    Examples
    --------

    .. code-block:: python

        # only the angle is wrong: (1, 0) against (0, 1)
        loss(HeadOutputs([[1., 0.]], s, c), HeadOutputs([[0., 1.]], s, c), cfg)[0]
        # 1.0

    """
    kind = kind or cfg.loss_kind
    total = 0.0
    grads = []
    for (weight, pred, target) in zip(cfg.loss_weights, predictions.as_tuple(), targets.as_tuple()):
        (value, grad) = head_loss(
            np.asarray(pred, dtype=float),
            np.asarray(target, dtype=float),
            kind,
            cfg.huber_delta
        )
        total += weight * value
        grads.append(weight * grad)
    return (total, HeadOutputs(*grads))
