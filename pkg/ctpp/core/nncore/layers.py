"""
Primitive differentiable layers built from tensor ops.
"""

from typing import Mapping, Optional

import numpy as np

from ctpp.core.exceptions import ShapeError
from ctpp.core.nncore import tensor as T
from ctpp.core.nncore.tensor import Tensor

GRU_PARAM_NAMES = ("w_z", "b_z", "w_r", "b_r", "w_h", "b_h")


def uniform_init(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """y = x W + b over the last axis of x."""
    x = T.as_tensor(x)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"linear: input {x.shape} does not match weight {weight.shape}")
    y = T.matmul(x, weight)
    if bias is not None:
        if bias.shape != (weight.shape[1],):
            raise ShapeError(f"linear: bias {bias.shape} does not match weight {weight.shape}")
        y = y + bias
    return y


def log_softmax(x: Tensor) -> Tensor:
    return T.log_softmax(x, axis=-1)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each feature vector to zero mean and unit variance, then scale and shift."""
    centered = x - x.mean(axis=-1, keepdims=True)
    variance = centered.square().mean(axis=-1, keepdims=True)
    return centered / (variance + eps).sqrt() * gain + bias


def gru_step(h_prev: Tensor, x: Tensor, params: Mapping[str, Tensor]) -> Tensor:
    """
    One gated recurrent unit update.

    Args:
        h_prev: previous hidden state, shape (..., d_h)
        x: current input, shape (..., d_in)
        params: ``w_z, w_r, w_h`` of shape (d_in + d_h, d_h) and biases ``b_z, b_r, b_h``

    Returns:
        The new hidden state, same shape as ``h_prev``.
    """
    h_prev, x = T.as_tensor(h_prev), T.as_tensor(x)
    d_h = h_prev.shape[-1]
    expected = (x.shape[-1] + d_h, d_h)
    for name in ("w_z", "w_r", "w_h"):
        if params[name].shape != expected:
            raise ShapeError(f"gru_step: {name} has shape {params[name].shape}, expected {expected}")
    if x.shape[:-1] != h_prev.shape[:-1]:
        raise ShapeError(f"gru_step: batch shapes differ, {x.shape} vs {h_prev.shape}")

    joined = T.concat([x, h_prev], axis=-1)
    update = linear(joined, params["w_z"], params["b_z"]).sigmoid()
    reset = linear(joined, params["w_r"], params["b_r"]).sigmoid()
    candidate = linear(T.concat([x, reset * h_prev], axis=-1), params["w_h"], params["b_h"]).tanh()
    return (1.0 - update) * h_prev + update * candidate


def init_gru(rng: np.random.Generator, d_in: int, d_h: int) -> dict:
    """Weight arrays for :func:`gru_step`; biases start at zero."""
    fan_in = d_in + d_h
    arrays = {}
    for gate in ("z", "r", "h"):
        arrays[f"w_{gate}"] = uniform_init(rng, (fan_in, d_h), fan_in)
        arrays[f"b_{gate}"] = np.zeros(d_h)
    return arrays
