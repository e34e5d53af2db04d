"""
SIREN kernel network: maps a time offset tau to convolution weights.
"""

from typing import List, Sequence, Tuple

import numpy as np

from ctpp.core.enums import KernelMode
from ctpp.core.exceptions import SpecError
from ctpp.core.nncore import tensor as T
from ctpp.core.nncore.layers import linear
from ctpp.core.nncore.params import ParamStore
from ctpp.core.nncore.tensor import Tensor


class SirenKernel:
    """
    Continuous kernel psi(tau) parametrized by a sinusoidal MLP.

    Hidden layers compute sin(omega_0 * (x W + b)); the output layer is affine.
    In ``full`` mode the output is reshaped to a (d, d) matrix applied as
    ``e @ psi(tau)``; in ``depthwise`` mode it is a length-d vector applied
    elementwise.
    """

    def __init__(
        self,
        store: ParamStore,
        prefix: str,
        dim: int,
        rng: np.random.Generator,
        hidden_sizes: Sequence[int] = (32, 32, 32),
        omega_0: float = 1.0,
        mode: KernelMode = KernelMode.FULL,
        group: str = "kernel",
    ):
        if not hidden_sizes:
            raise SpecError("a SIREN kernel needs at least one hidden layer")
        if omega_0 <= 0:
            raise SpecError(f"omega_0 must be positive, got {omega_0}")
        self.dim = dim
        self.omega_0 = float(omega_0)
        self.mode = KernelMode(mode)
        self.prefix = prefix

        out_size = dim * dim if self.mode == KernelMode.FULL else dim
        sizes = [1, *hidden_sizes, out_size]
        self.layers: List[Tuple[Tensor, Tensor]] = []
        for index, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if index == 0:
                bound = 1.0 / fan_in
            elif index < len(sizes) - 2:
                bound = np.sqrt(6.0 / fan_in) / self.omega_0
            else:
                bound = 1.0 / fan_in
            weight = store.add(f"{prefix}.w{index}", rng.uniform(-bound, bound, (fan_in, fan_out)), group)
            bias = store.add(f"{prefix}.b{index}", np.zeros(fan_out), group)
            self.layers.append((weight, bias))

    @property
    def output_shape(self) -> Tuple[int, ...]:
        return (self.dim, self.dim) if self.mode == KernelMode.FULL else (self.dim,)

    def __call__(self, taus: np.ndarray) -> Tensor:
        """Evaluate at P offsets; returns (P, d, d) or (P, d)."""
        x = T.Tensor(np.asarray(taus, dtype=np.float64).reshape(-1, 1))
        for weight, bias in self.layers[:-1]:
            x = (linear(x, weight, bias) * self.omega_0).sin()
        weight, bias = self.layers[-1]
        out = linear(x, weight, bias)
        return out.reshape((x.shape[0],) + self.output_shape)
