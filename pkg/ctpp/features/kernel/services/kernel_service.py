"""
Kernel evaluation helpers: single offsets and uniform grids for inspection.
"""

import math
from typing import Tuple

import numpy as np

from ctpp.core.exceptions import DomainError, UsageError
from ctpp.core.nncore import tensor as T
from ctpp.features.kernel.models.siren_model import SirenKernel


def kernel_eval(kernel: SirenKernel, tau: float) -> np.ndarray:
    """psi(tau) as a (d, d) matrix or length-d vector."""
    if not math.isfinite(tau):
        raise DomainError(f"kernel offset must be finite, got {tau}")
    with T.no_grad():
        return kernel(np.array([tau])).data[0]


def kernel_grid(kernel: SirenKernel, horizon: float, grid_size: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sample psi on ``grid_size`` evenly spaced offsets over [0, horizon].

    Returns:
        (taus, values) with values shaped (grid_size, d, d) or (grid_size, d)
    """
    if grid_size < 1:
        raise UsageError("grid size must be at least 1")
    if not math.isfinite(horizon) or horizon <= 0:
        raise UsageError(f"need a finite positive horizon to sample a kernel, got {horizon}")
    taus = np.linspace(0.0, horizon, grid_size)
    with T.no_grad():
        values = kernel(taus).data
    return taus, values
