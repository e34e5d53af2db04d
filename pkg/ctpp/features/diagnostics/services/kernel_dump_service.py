"""
Sampling learned kernels onto a grid for plotting.
"""

import csv
import math
from pathlib import Path
from typing import List, Optional, Tuple, Union

from ctpp.core.enums import KernelMode
from ctpp.core.exceptions import UsageError
from ctpp.features.kernel.services.kernel_service import kernel_grid
from ctpp.features.train.models.ctpp_model import CtppModel

COLUMNS = ("layer", "channel", "tau", "row", "col", "value")

KernelRow = Tuple[int, int, float, int, int, float]


def kernel_rows(model: CtppModel, grid_size: int, tau_max: Optional[float] = None) -> List[KernelRow]:
    """
    One row per kernel entry and grid offset.

    Depthwise kernels report entry k as row = col = k. Channels with an
    infinite horizon are sampled over [0, tau_max].
    """
    if not model.local.layers:
        raise UsageError("model has no local encoder layers, so there are no kernels to dump")
    rows: List[KernelRow] = []
    for layer_index, layer in enumerate(model.local.layers):
        for channel, (kernel, eta) in enumerate(layer.channels):
            horizon = eta
            if not math.isfinite(eta):
                if tau_max is None:
                    raise UsageError(f"layer {layer_index} channel {channel} has an infinite horizon; pass --tau-max")
                horizon = tau_max
            taus, values = kernel_grid(kernel, horizon, grid_size)
            for tau, value in zip(taus, values):
                if kernel.mode == KernelMode.FULL:
                    for row in range(kernel.dim):
                        for col in range(kernel.dim):
                            rows.append((layer_index, channel, float(tau), row, col, float(value[row, col])))
                else:
                    for k in range(kernel.dim):
                        rows.append((layer_index, channel, float(tau), k, k, float(value[k])))
    return rows


def dump_kernels(
    model: CtppModel,
    path: Union[str, Path],
    grid_size: int = 100,
    tau_max: Optional[float] = None,
) -> int:
    """Write :func:`kernel_rows` to a CSV file and return the number of value rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = kernel_rows(model, grid_size, tau_max)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([repr(item) if isinstance(item, float) else item for item in row])
    return len(rows)
