"""Adam with a decaying learning rate and a batch-norm momentum schedule

"""

from typing import Dict

import attr
import numpy as np

from bevbox.network.config import TrainConfig
from bevbox.network.model import NetworkParams


BN_DECAY_RATE = 0.5
"""Halving rate of the gap between the batch-norm momentum and one"""


class NonFiniteGradientError(ValueError):
    """A gradient contains NaN or infinity"""


def learning_rate(step: int, train_cfg: TrainConfig) -> float:
    """Continuously decayed learning rate

    Examples
    --------

    .. code-block:: python

        learning_rate(250000, TrainConfig())
        # 0.0035

    """
    return train_cfg.lr0 * train_cfg.lr_decay_rate ** (step / train_cfg.lr_decay_steps)


def bn_momentum(step: int, train_cfg: TrainConfig) -> float:
    """Running-statistics momentum, from ``bn_decay_start`` up to ``bn_decay_end``

    """
    gap = (1.0 - train_cfg.bn_decay_start) * BN_DECAY_RATE ** (step / train_cfg.bn_decay_steps)
    return min(train_cfg.bn_decay_end, 1.0 - gap)


@attr.s
class AdamState:
    """First and second moment estimates per parameter

    """

    m = attr.ib(factory=dict)
    v = attr.ib(factory=dict)


def check_gradients(grads: Dict[str, np.ndarray]) -> None:
    for (name, g) in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"Non-finite gradient for parameter {name}")
    return


def adam_step(
        params: NetworkParams,
        grads: Dict[str, np.ndarray],
        step: int,
        train_cfg: TrainConfig,
        state: AdamState = None
) -> NetworkParams:
    """One Adam update

    Parameters
    ----------
    params : NetworkParams
        Current parameters, left untouched
    grads : Dict[str, np.ndarray]
        Gradient per trainable tensor
    step : int
        Number of updates already taken
    train_cfg : TrainConfig
        Learning-rate schedule and Adam constants
    state : AdamState
        Moment estimates, updated in place; a fresh state if omitted

    Returns
    -------
    NetworkParams
        Updated parameters with the step counter advanced by one

    """
    check_gradients(grads)
    state = AdamState() if state is None else state
    (b1, b2) = (train_cfg.beta1, train_cfg.beta2)
    t = step + 1
    lr = learning_rate(step, train_cfg)
    tensors = dict(params.tensors)
    for (name, g) in grads.items():
        if params[name].shape != g.shape:
            raise ValueError(f"Gradient shape {g.shape} does not match {name} {params[name].shape}")
        m = b1 * state.m.get(name, 0.0) + (1.0 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1.0 - b2) * g ** 2
        (state.m[name], state.v[name]) = (m, v)
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        tensors[name] = params[name] - lr * m_hat / (np.sqrt(v_hat) + train_cfg.adam_eps)
    return NetworkParams(tensors=tensors, step=t)
