from dataclasses import dataclass

import numpy as np

from ctpp.core.nncore.tensor import Tensor


@dataclass
class MixtureParams:
    """Log-normal mixture over the next interval, kept in log space for the weights and scales."""

    log_weights: Tensor
    log_scales: Tensor
    locs: Tensor

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights.data)

    @property
    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales.data)

    @property
    def means(self) -> np.ndarray:
        return self.locs.data

    @property
    def num_components(self) -> int:
        return self.locs.shape[-1]
