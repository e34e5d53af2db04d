"""
Parameter containers for the local (convolutional) and global (recurrent) encoders.
"""

from typing import Dict, List, Sequence, Tuple

import numpy as np

from ctpp.core.enums import KernelMode, TimeTransform
from ctpp.core.exceptions import SpecError
from ctpp.core.nncore.layers import init_gru, uniform_init
from ctpp.core.nncore.params import ParamStore
from ctpp.core.nncore.tensor import Tensor
from ctpp.features.kernel.models.siren_model import SirenKernel


class EmbeddingTable:
    """K x d table; row k embeds mark k."""

    def __init__(self, store: ParamStore, num_marks: int, dim: int, rng: np.random.Generator):
        self.num_marks = num_marks
        self.dim = dim
        self.weight = store.add("embedding.weight", uniform_init(rng, (num_marks, dim), dim), "embedding")


class LocalEncoderLayer:
    """C kernel channels with their horizons, the C*d -> d aggregation and a layer norm."""

    def __init__(
        self,
        store: ParamStore,
        index: int,
        dim: int,
        horizons: Sequence[float],
        rng: np.random.Generator,
        hidden_sizes: Sequence[int] = (32, 32, 32),
        omega_0: float = 1.0,
        kernel_mode: KernelMode = KernelMode.FULL,
        ln_eps: float = 1e-5,
    ):
        if not horizons:
            raise SpecError("a local encoder layer needs at least one channel")
        for eta in horizons:
            if not eta > 0:
                raise SpecError(f"horizons must be positive or infinite, got {eta}")
        self.dim = dim
        self.ln_eps = ln_eps
        self.channels: List[Tuple[SirenKernel, float]] = [
            (
                SirenKernel(
                    store, f"local{index}.kernel{c}", dim, rng,
                    hidden_sizes=hidden_sizes, omega_0=omega_0, mode=kernel_mode,
                ),
                float(eta),
            )
            for c, eta in enumerate(horizons)
        ]
        fan_in = len(horizons) * dim
        self.w_out = store.add(f"local{index}.w_out", uniform_init(rng, (fan_in, dim), fan_in), "aggregation")
        self.ln_gain = store.add(f"local{index}.ln_gain", np.ones(dim), "aggregation")
        self.ln_bias = store.add(f"local{index}.ln_bias", np.zeros(dim), "aggregation")

    @property
    def num_channels(self) -> int:
        return len(self.channels)


class LocalEncoderStack:
    """N local layers applied in order; N = 0 is the encoder without local context."""

    def __init__(self, layers: Sequence[LocalEncoderLayer] = ()):
        self.layers = list(layers)

    def __len__(self) -> int:
        return len(self.layers)


class GlobalEncoder:
    """GRU over [local feature ; interval] with h_0 = 0."""

    def __init__(
        self,
        store: ParamStore,
        input_dim: int,
        hidden_dim: int,
        rng: np.random.Generator,
        time_transform: TimeTransform = TimeTransform.RAW,
    ):
        if hidden_dim < 1:
            raise SpecError("hidden_dim must be at least 1")
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.time_transform = TimeTransform(time_transform)
        self.params: Dict[str, Tensor] = {
            name: store.add(f"gru.{name}", value, "gru")
            for name, value in init_gru(rng, input_dim + 1, hidden_dim).items()
        }

    def transform_intervals(self, intervals: np.ndarray) -> np.ndarray:
        if self.time_transform == TimeTransform.LOG1P:
            return np.log1p(intervals)
        return intervals
