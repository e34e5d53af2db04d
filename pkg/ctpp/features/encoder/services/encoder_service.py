"""
Encoder forward passes over padded batches.

Inputs are (B, L, d) tensors with matching (B, L) ``times`` and ``mask``
arrays; a 2-D (L, d) input is treated as a batch of one.
"""

from typing import Optional, Tuple

import numpy as np

from ctpp.core.enums import KernelMode
from ctpp.core.exceptions import ShapeError
from ctpp.core.nncore import tensor as T
from ctpp.core.nncore.layers import gru_step, layer_norm, linear
from ctpp.core.nncore.tensor import Tensor
from ctpp.features.encoder.models.encoder_model import (
    EmbeddingTable,
    GlobalEncoder,
    LocalEncoderLayer,
    LocalEncoderStack,
)
from ctpp.features.kernel.models.siren_model import SirenKernel


def _as_batch(times: np.ndarray, mask: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    times = np.atleast_2d(np.asarray(times, dtype=np.float64))
    mask = np.ones(times.shape, dtype=bool) if mask is None else np.atleast_2d(np.asarray(mask, dtype=bool))
    return times, mask


def embed(marks: np.ndarray, table: EmbeddingTable) -> Tensor:
    marks = np.asarray(marks, dtype=np.int64)
    if marks.size and (marks.min() < 0 or marks.max() >= table.num_marks):
        raise IndexError(f"marks must lie in [0, {table.num_marks})")
    return T.take_rows(table.weight, marks)


def causal_pairs(
    times: np.ndarray,
    mask: np.ndarray,
    horizon: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Flat (target, source, offset) triples with j < i and 0 <= t_i - t_j <= horizon.

    Indices address rows of the (B * L, d) flattened batch.
    """
    batch, length = times.shape
    target, source = np.tril_indices(length, k=-1)
    offsets = times[:, target] - times[:, source]
    valid = mask[:, target] & mask[:, source] & (offsets >= 0) & (offsets <= horizon)
    rows, cols = np.nonzero(valid)
    return rows * length + target[cols], rows * length + source[cols], offsets[rows, cols]


def conv_channel(
    embeddings: Tensor,
    times: np.ndarray,
    kernel: SirenKernel,
    horizon: float,
    mask: Optional[np.ndarray] = None,
) -> Tensor:
    """c_i = sum over j < i with 0 <= t_i - t_j <= horizon of e_j applied through psi(t_i - t_j)."""
    embeddings = T.as_tensor(embeddings)
    squeeze = embeddings.ndim == 2
    times, mask = _as_batch(times, mask)
    if squeeze:
        embeddings = embeddings.reshape((1,) + embeddings.shape)
    batch, length, dim = embeddings.shape
    if times.shape != (batch, length):
        raise ShapeError(f"times {times.shape} do not match embeddings {embeddings.shape}")

    target, source, offsets = causal_pairs(times, mask, horizon)
    sources = T.take_rows(embeddings.reshape(batch * length, dim), source)
    weights = kernel(offsets)
    if kernel.mode == KernelMode.FULL:
        messages = T.pair_matvec(sources, weights)
    else:
        messages = sources * weights
    out = T.scatter_rows(messages, target, batch * length).reshape(batch, length, dim)
    return out[0] if squeeze else out


def local_layer(
    embeddings: Tensor,
    times: np.ndarray,
    layer: LocalEncoderLayer,
    mask: Optional[np.ndarray] = None,
) -> Tensor:
    """Concatenate channel outputs, project by W_out, add the residual and normalize."""
    embeddings = T.as_tensor(embeddings)
    features = T.concat(
        [conv_channel(embeddings, times, kernel, eta, mask) for kernel, eta in layer.channels],
        axis=-1,
    )
    if layer.w_out.shape != (features.shape[-1], embeddings.shape[-1]):
        raise ShapeError(f"w_out {layer.w_out.shape} does not fit {features.shape[-1]} channel features")
    mixed = linear(features, layer.w_out) + embeddings
    return layer_norm(mixed, layer.ln_gain, layer.ln_bias, layer.ln_eps)


def local_encode(
    embeddings: Tensor,
    times: np.ndarray,
    stack: LocalEncoderStack,
    mask: Optional[np.ndarray] = None,
) -> Tensor:
    out = embeddings
    for layer in stack.layers:
        out = local_layer(out, times, layer, mask)
    return out


def global_encode(
    features: Tensor,
    intervals: np.ndarray,
    encoder: GlobalEncoder,
) -> Tensor:
    """
    Run the GRU over the sequence axis.

    ``intervals[i]`` is t_i - t_{i-1} with t_0 = 0. Returns h_1..h_L stacked
    along the sequence axis.
    """
    features = T.as_tensor(features)
    squeeze = features.ndim == 2
    intervals = np.atleast_2d(np.asarray(intervals, dtype=np.float64))
    if squeeze:
        features = features.reshape((1,) + features.shape)
    batch, length, _ = features.shape
    if intervals.shape != (batch, length):
        raise ShapeError(f"intervals {intervals.shape} do not match features {features.shape}")

    steps = T.concat([features, T.Tensor(encoder.transform_intervals(intervals)[..., None])], axis=-1)
    h = T.Tensor(np.zeros((batch, encoder.hidden_dim)))
    states = []
    for i in range(length):
        h = gru_step(h, steps[:, i, :], encoder.params)
        states.append(h)
    out = T.stack(states, axis=1)
    return out[0] if squeeze else out
