"""Unit tests for the regression loss"""

import numpy as np
from numpy.testing import assert_allclose, assert_almost_equal
import pytest

from bevbox.network import NetworkConfig
from bevbox.network.loss import head_loss, huber, loss
from bevbox.network.model import HeadOutputs


CFG = NetworkConfig()

TARGET = HeadOutputs(
    angle=np.array([[0.0, 1.0]]),
    size=np.array([[1.8, 4.5]]),
    center=np.array([[0.2, -0.1]])
)


def shifted(angle=0.0, size=0.0, center=0.0) -> HeadOutputs:
    return HeadOutputs(TARGET.angle + angle, TARGET.size + size, TARGET.center + center)


@pytest.mark.parametrize("predictions,expected", [
    (shifted(), 0.0),
    (HeadOutputs(np.array([[1.0, 0.0]]), TARGET.size, TARGET.center), 1.0),
    (shifted(size=0.1), 0.02),
    (shifted(center=[[1.0, 0.0]]), 0.5),
])
def test_loss_examples(predictions, expected):
    (value, _) = loss(predictions, TARGET, CFG)
    assert_almost_equal(value, expected, decimal=12)
    return


def test_loss_gradient(rng):
    predictions = HeadOutputs(
        rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    )
    targets = HeadOutputs(
        rng.normal(size=(3, 2)), rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    )
    for kind in ("mse", "huber"):
        cfg = NetworkConfig(loss_kind=kind, huber_delta=0.5)
        (_, grads) = loss(predictions, targets, cfg)
        h = 1e-6
        for (pred, grad) in zip(predictions.as_tuple(), grads.as_tuple()):
            for index in np.ndindex(pred.shape):
                old = pred[index]
                pred[index] = old + h
                up = loss(predictions, targets, cfg)[0]
                pred[index] = old - h
                down = loss(predictions, targets, cfg)[0]
                pred[index] = old
                assert_allclose(grad[index], (up - down) / (2 * h), atol=1e-7)
    return


def test_weights_and_override():
    cfg = NetworkConfig(loss_weights=(0.0, 1.0, 3.0), loss_kind="huber")
    predictions = shifted(angle=5.0, size=2.0, center=0.5)
    # huber: 1.5 per size component, 0.125 per center component
    assert_almost_equal(loss(predictions, TARGET, cfg)[0], 1.5 + 3 * 0.125)
    assert_almost_equal(loss(predictions, TARGET, cfg, kind="mse")[0], 4.0 + 3 * 0.25)
    return


def test_huber():
    (value, grad) = huber(np.array([-3.0, -0.5, 0.0, 0.5, 3.0]), delta=1.0)
    assert_allclose(value, [2.5, 0.125, 0.0, 0.125, 2.5])
    assert_allclose(grad, [-1.0, -0.5, 0.0, 0.5, 1.0])
    return


def test_shape_mismatch():
    with pytest.raises(ValueError):
        head_loss(np.zeros((2, 2)), np.zeros((2, 1)))
    return


def test_loss_weights_parsing():
    assert NetworkConfig(loss_weights="1,2,0.5").loss_weights == (1.0, 2.0, 0.5)
    with pytest.raises(ValueError):
        NetworkConfig(loss_weights=(1.0, 2.0))
    with pytest.raises(ValueError):
        NetworkConfig(loss_weights=(1.0, -2.0, 1.0))
    return
