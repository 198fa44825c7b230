"""Unit tests for layer primitives"""

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
import pytest

from bevbox.network import layers


def numeric_gradient(f, x, h=1e-6):
    """Central differences of a scalar function, entry by entry"""
    grad = np.zeros_like(x)
    for index in np.ndindex(x.shape):
        old = x[index]
        x[index] = old + h
        up = f()
        x[index] = old - h
        down = f()
        x[index] = old
        grad[index] = (up - down) / (2 * h)
    return grad


def test_dense(rng):
    A = rng.normal(size=(5, 3))
    W = rng.normal(size=(3, 4))
    b = rng.normal(size=(1, 4))
    R = rng.normal(size=(5, 4))
    f = lambda: np.sum(R * layers.dense_forward(A, W, b))
    (dA, dW, db) = layers.dense_backward(R, A, W)
    assert_allclose(dA, numeric_gradient(f, A), atol=1e-8)
    assert_allclose(dW, numeric_gradient(f, W), atol=1e-8)
    assert_allclose(db, numeric_gradient(f, b), atol=1e-8)
    assert_array_equal(layers.dense_forward(A, W), A @ W)
    return


def test_batchnorm_train(rng):
    Z = rng.normal(2.0, 3.0, size=(6, 4))
    gamma = rng.uniform(0.5, 2.0, size=(1, 4))
    beta = rng.normal(size=(1, 4))
    R = rng.normal(size=(6, 4))

    def f():
        return np.sum(R * layers.batchnorm_forward_train(Z, gamma, beta)[0])

    (Y, cache, (mean, var)) = layers.batchnorm_forward_train(Z, gamma, beta)
    assert_allclose(mean, Z.mean(axis=0, keepdims=True))
    assert_allclose(var, Z.var(axis=0, keepdims=True))
    assert_allclose(((Y - beta) / gamma).mean(axis=0), 0.0, atol=1e-12)
    (dZ, dgamma, dbeta) = layers.batchnorm_backward(R, cache, gamma)
    assert_allclose(dZ, numeric_gradient(f, Z), atol=1e-7)
    assert_allclose(dgamma, numeric_gradient(f, gamma), atol=1e-7)
    assert_allclose(dbeta, numeric_gradient(f, beta), atol=1e-7)
    return


def test_batchnorm_infer_matches_train_statistics(rng):
    Z = rng.normal(size=(8, 3))
    (gamma, beta) = (np.ones((1, 3)), np.zeros((1, 3)))
    (Y, _, (mean, var)) = layers.batchnorm_forward_train(Z, gamma, beta)
    assert_allclose(layers.batchnorm_forward_infer(Z, gamma, beta, mean, var), Y)
    return


def test_batchnorm_single_row():
    Z = np.array([[1.0, -4.0]])
    (Y, cache, _) = layers.batchnorm_forward_train(Z, np.ones((1, 2)), np.full((1, 2), 0.5))
    assert_array_equal(Y, [[0.5, 0.5]])
    (dZ, dgamma, dbeta) = layers.batchnorm_backward(np.ones((1, 2)), cache, np.ones((1, 2)))
    assert_array_equal(dZ, 0.0)
    assert_array_equal(dbeta, [[1.0, 1.0]])
    return


@pytest.mark.parametrize("name", ["relu", "tanh", "identity"])
def test_activations(rng, name):
    Z = rng.normal(size=(4, 5))
    Z[np.abs(Z) < 1e-3] = 0.5
    R = rng.normal(size=(4, 5))
    f = lambda: np.sum(R * layers.activation_forward(name, Z))
    Y = layers.activation_forward(name, Z)
    assert_allclose(
        layers.activation_backward(name, R, Z, Y), numeric_gradient(f, Z), atol=1e-8
    )
    return


def test_relu_gradient_at_zero():
    Z = np.zeros((1, 3))
    assert_array_equal(layers.activation_backward("relu", np.ones((1, 3)), Z, Z), 0.0)
    return


def test_unknown_activation():
    with pytest.raises(ValueError):
        layers.activation_forward("sigmoid", np.zeros(2))
    with pytest.raises(ValueError):
        layers.activation_backward("sigmoid", np.zeros(2), np.zeros(2), np.zeros(2))
    return


def test_maxpool():
    H = np.array([
        [[1.0, 5.0], [3.0, 5.0], [2.0, -1.0]],
        [[0.0, 0.0], [-1.0, 2.0], [4.0, 1.0]],
    ])
    (G, argmax) = layers.maxpool_forward(H)
    assert_array_equal(G, [[3.0, 5.0], [4.0, 2.0]])
    # ties go to the first point
    assert_array_equal(argmax[:, 0, :], [[1, 0], [2, 1]])
    dH = layers.maxpool_backward(np.array([[10.0, 20.0], [30.0, 40.0]]), argmax, 3)
    assert_array_equal(dH, [
        [[0.0, 20.0], [10.0, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [0.0, 40.0], [30.0, 0.0]],
    ])
    return


def test_maxpool_gradient(rng):
    H = rng.normal(size=(3, 7, 4))
    R = rng.normal(size=(3, 4))
    f = lambda: np.sum(R * layers.maxpool_forward(H)[0])
    (_, argmax) = layers.maxpool_forward(H)
    assert_allclose(layers.maxpool_backward(R, argmax, 7), numeric_gradient(f, H), atol=1e-8)
    return
