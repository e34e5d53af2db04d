"""
Grid sweeps over kernel horizon, channel count and SIREN frequency.
"""

import csv
import itertools
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from ctpp.core.exceptions import UsageError
from ctpp.features.events.schemas.event_schemas import Dataset
from ctpp.features.train.schemas.train_schemas import Metrics, ModelConfig, TrainConfig
from ctpp.features.train.services.eval_service import evaluate
from ctpp.features.train.services.train_service import train_model

logger = logging.getLogger(__name__)

GRID_COLUMNS = ["channels", "horizon", "omega_0", "best_epoch"]


def run_sweep(
    dataset: Dataset,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    horizon_multiples: Sequence[float],
    channel_counts: Sequence[int],
    omegas: Sequence[float],
    output_csv: Optional[Path] = None,
    split: str = "test",
) -> List[Dict[str, object]]:
    """
    Train and evaluate one model per (channels, horizon, omega_0) grid point.

    Every channel of a grid point shares the horizon, given in multiples of
    delta. Rows hold the grid coordinates followed by the Metrics fields.
    """
    if not horizon_multiples or not channel_counts or not omegas:
        raise UsageError("every sweep axis needs at least one value")
    sequences = dataset.split(split)
    if not sequences:
        raise UsageError(f"the {split} split is empty")

    rows: List[Dict[str, object]] = []
    for channels, horizon, omega in itertools.product(channel_counts, horizon_multiples, omegas):
        config = model_cfg.model_copy(update={
            "horizons": [float(horizon)] * int(channels),
            "horizon_unit": "delta",
            "omega_0": float(omega),
        })
        logger.info("sweep point: C=%d, horizon=%g delta, omega_0=%g", channels, horizon, omega)
        result = train_model(dataset, ModelConfig.model_validate(config.model_dump()), train_cfg)
        metrics = evaluate(result.model, sequences, score_first_event=train_cfg.score_first_event)
        row: Dict[str, object] = {
            "channels": int(channels),
            "horizon": float(horizon),
            "omega_0": float(omega),
            "best_epoch": result.best_epoch,
        }
        row.update(metrics.model_dump(mode="json"))
        rows.append(row)

    if output_csv is not None:
        output_csv = Path(output_csv)
        output_csv.parent.mkdir(parents=True, exist_ok=True)
        with output_csv.open("w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=GRID_COLUMNS + list(Metrics.model_fields))
            writer.writeheader()
            writer.writerows(rows)
    return rows
