"""Layer primitives with hand-written gradients

Every layer is a pair of pure functions: the forward pass returns its output
and whatever the backward pass needs, the backward pass maps an output
gradient to input and parameter gradients. Rows are examples (a point or a
cloud), columns are channels.

"""

from typing import Tuple

import numpy as np


BN_EPS = 1e-5


#
# Dense
# ~~~~~
#


def dense_forward(A: np.ndarray, W: np.ndarray, b: np.ndarray = None) -> np.ndarray:
    """Affine map ``A W + b``

    """
    Z = A @ W
    return Z if b is None else Z + b


def dense_backward(dZ: np.ndarray, A: np.ndarray, W: np.ndarray):
    """Gradients ``(dA, dW, db)`` of an affine map

    """
    return (dZ @ W.T, A.T @ dZ, dZ.sum(axis=0, keepdims=True))


#
# Batch normalization
# ~~~~~~~~~~~~~~~~~~~
#


def batchnorm_forward_train(
        Z: np.ndarray,
        gamma: np.ndarray,
        beta: np.ndarray,
        eps: float = BN_EPS
):
    """Normalize with the batch statistics

    Returns
    -------
    Y : np.ndarray
        Normalized, scaled and shifted output
    cache : Tuple[np.ndarray, np.ndarray]
        Normalized input and inverse standard deviation
    stats : Tuple[np.ndarray, np.ndarray]
        Batch mean and (biased) variance for the running statistics

    """
    mean = Z.mean(axis=0, keepdims=True)
    var = Z.var(axis=0, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (Z - mean) * inv_std
    return (gamma * xhat + beta, (xhat, inv_std), (mean, var))


def batchnorm_forward_infer(
        Z: np.ndarray,
        gamma: np.ndarray,
        beta: np.ndarray,
        running_mean: np.ndarray,
        running_var: np.ndarray,
        eps: float = BN_EPS
) -> np.ndarray:
    """Normalize with the running statistics

    """
    return gamma * (Z - running_mean) / np.sqrt(running_var + eps) + beta


def batchnorm_backward(dY: np.ndarray, cache: Tuple, gamma: np.ndarray):
    """Gradients ``(dZ, dgamma, dbeta)`` of training-mode batch normalization

    """
    (xhat, inv_std) = cache
    m = dY.shape[0]
    dgamma = np.sum(dY * xhat, axis=0, keepdims=True)
    dbeta = dY.sum(axis=0, keepdims=True)
    dxhat = dY * gamma
    dZ = (inv_std / m) * (
        m * dxhat - dxhat.sum(axis=0, keepdims=True) -
        xhat * np.sum(dxhat * xhat, axis=0, keepdims=True)
    )
    return (dZ, dgamma, dbeta)


#
# Activations
# ~~~~~~~~~~~
#


def activation_forward(name: str, Z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(Z, 0.0)
    if name == "tanh":
        return np.tanh(Z)
    if name == "identity":
        return Z
    raise ValueError(f"Unknown activation: {name}")


def activation_backward(name: str, dY: np.ndarray, Z: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Gradient through an activation given its input ``Z`` and output ``Y``

    The ReLU gradient at exactly zero is zero.

    """
    if name == "relu":
        return dY * (Z > 0)
    if name == "tanh":
        return dY * (1.0 - Y ** 2)
    if name == "identity":
        return dY
    raise ValueError(f"Unknown activation: {name}")


#
# Pooling
# ~~~~~~~
#


def maxpool_forward(H: np.ndarray):
    """Channelwise maximum over the points of each cloud

    Parameters
    ----------
    H : np.ndarray
        ``(B, N, C)`` per-point features

    Returns
    -------
    G : np.ndarray
        ``(B, C)`` global features
    argmax : np.ndarray
        ``(B, 1, C)`` index of the winning point; ties go to the lowest index

    """
    argmax = np.argmax(H, axis=1)[:, None, :]
    return (np.take_along_axis(H, argmax, axis=1)[:, 0, :], argmax)


def maxpool_backward(dG: np.ndarray, argmax: np.ndarray, n_points: int) -> np.ndarray:
    """Route the global gradient to the winning point of each channel

    """
    (B, C) = dG.shape
    dH = np.zeros((B, n_points, C), dtype=dG.dtype)
    np.put_along_axis(dH, argmax, dG[:, None, :], axis=1)
    return dH
