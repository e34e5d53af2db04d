"""
Training loop: Adam with plateau learning-rate decay, gradient clipping,
early stopping and best-validation checkpoint selection.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ctpp.core.exceptions import TrainingDiverged, UsageError
from ctpp.core.nncore import tensor as T
from ctpp.core.nncore.optim import AdamState, adam_step, clip_grad_norm
from ctpp.features.events.schemas.event_schemas import Dataset, EventSequence
from ctpp.features.events.services.batching import iter_batches, make_batch
from ctpp.features.events.services.event_stats import compute_stats
from ctpp.features.train.models.ctpp_model import CtppModel, resolve_horizons
from ctpp.features.train.schemas.train_schemas import HistoryRow, ModelConfig, TrainConfig
from ctpp.features.train.services.loss_service import objective_sum

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.npz"
HISTORY_NAME = "history.csv"


@dataclass
class TrainResult:
    model: CtppModel
    history: List[HistoryRow] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf
    stopped_early: bool = False
    checkpoint: Optional[Path] = None


def build_model(dataset: Dataset, model_cfg: ModelConfig, train_cfg: TrainConfig) -> CtppModel:
    """Model sized for ``dataset``, with horizons resolved against its mean interval."""
    delta = compute_stats(dataset).delta
    return CtppModel(
        model_cfg,
        num_marks=dataset.num_marks,
        mode=train_cfg.mode,
        horizons=resolve_horizons(model_cfg, delta),
        seed=train_cfg.seed,
        ablate_local=train_cfg.ablate_local,
        beta=train_cfg.beta,
        time_scale=dataset.time_scale,
    )


def _shards(group: List[EventSequence], threads: int) -> List[List[EventSequence]]:
    count = min(threads, len(group))
    bounds = np.linspace(0, len(group), count + 1).astype(int)
    return [group[lo:hi] for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def _shard_gradients(
    model: CtppModel, shard: List[EventSequence], config: TrainConfig
) -> Tuple[float, int, List[np.ndarray]]:
    total, count = objective_sum(model, make_batch(shard), config)
    return float(total.data), count, T.grad(total, list(model.store))


def batch_gradients(
    model: CtppModel,
    group: List[EventSequence],
    config: TrainConfig,
    executor: Optional[ThreadPoolExecutor] = None,
) -> Tuple[float, int, List[np.ndarray]]:
    """
    Summed loss, event count and summed gradients over one batch.

    With an executor the batch is split into shards whose gradients are
    reduced in shard order, so the result does not depend on scheduling.
    """
    shards = _shards(group, config.threads)
    if executor is None or len(shards) == 1:
        results = [_shard_gradients(model, shard, config) for shard in shards]
    else:
        results = list(executor.map(lambda shard: _shard_gradients(model, shard, config), shards))
    loss = sum(r[0] for r in results)
    count = sum(r[1] for r in results)
    grads = [sum(parts) for parts in zip(*(r[2] for r in results))]
    return loss, count, grads


def evaluate_loss(model: CtppModel, sequences: Sequence[EventSequence], config: TrainConfig) -> float:
    """Per-event training objective over ``sequences`` without recording gradients."""
    total, count = 0.0, 0
    with T.no_grad():
        for group in iter_batches(list(sequences), config.batch_size):
            loss, n = objective_sum(model, make_batch(group), config)
            total += float(loss.data)
            count += n
    if count == 0:
        raise UsageError("no scored events in the evaluation sequences")
    return total / count


def write_history(history: Sequence[HistoryRow], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(HistoryRow.model_fields))
        writer.writeheader()
        for row in history:
            writer.writerow(row.model_dump())
    return path


def _diverged(model: CtppModel, state: Dict[str, np.ndarray], where: str, output_dir: Optional[Path]):
    checkpoint = None
    if output_dir is not None:
        model.store.load_state_dict(state)
        checkpoint = model.save(output_dir / CHECKPOINT_NAME, {"diverged": True})
    logger.error("training diverged: non-finite loss %s", where)
    return TrainingDiverged(f"non-finite loss {where}", checkpoint=checkpoint)


def train_model(
    dataset: Dataset,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    output_dir: Optional[Path] = None,
    model: Optional[CtppModel] = None,
) -> TrainResult:
    """
    Fit a model on the training split and keep the best-validation weights.

    Args:
        dataset: train/validation/test splits, already time-scaled
        model_cfg: architecture
        train_cfg: optimization settings
        output_dir: when given, receives checkpoint.npz and history.csv (also
            after a divergence)
        model: start from this model instead of a fresh one

    Returns:
        TrainResult holding the model restored to its best epoch

    Raises:
        UsageError: if a split needed for training is empty
        TrainingDiverged: on a non-finite loss; the last good weights are saved first
    """
    if not dataset.train or not dataset.validation:
        raise UsageError("training needs non-empty train and validation splits")
    model = model or build_model(dataset, model_cfg, train_cfg)
    shuffle_seed, = np.random.SeedSequence(train_cfg.seed).spawn(1)
    rng = np.random.Generator(np.random.Philox(shuffle_seed))
    optimizer = AdamState()
    lr = train_cfg.lr
    result = TrainResult(model=model)
    best_state = model.store.state_dict()
    since_best = since_decay = 0

    logger.info(
        "training %s model: %d parameters, %d train / %d validation sequences",
        train_cfg.mode.value, model.store.num_values(), len(dataset.train), len(dataset.validation),
    )
    executor = ThreadPoolExecutor(max_workers=train_cfg.threads) if train_cfg.threads > 1 else None
    try:
        for epoch in range(1, train_cfg.max_epochs + 1):
            epoch_loss, epoch_count = 0.0, 0
            for group in iter_batches(dataset.train, train_cfg.batch_size, rng):
                loss, count, grads = batch_gradients(model, group, train_cfg, executor)
                if count == 0:
                    continue
                if not math.isfinite(loss):
                    raise _diverged(model, best_state, f"at epoch {epoch}", output_dir)
                for param, g in zip(model.store, grads):
                    param.grad = g / count
                clip_grad_norm(model.store, train_cfg.grad_clip)
                adam_step(model.store, optimizer, lr)
                epoch_loss += loss
                epoch_count += count

            val_loss = evaluate_loss(model, dataset.validation, train_cfg)
            if not math.isfinite(val_loss):
                raise _diverged(model, best_state, f"on validation at epoch {epoch}", output_dir)
            train_loss = epoch_loss / max(epoch_count, 1)
            result.history.append(HistoryRow(epoch=epoch, train_loss=train_loss, val_loss=val_loss, lr=lr))
            logger.info("epoch %d: train %.5f, validation %.5f, lr %.2e", epoch, train_loss, val_loss, lr)

            if val_loss < result.best_val_loss:
                result.best_val_loss = val_loss
                result.best_epoch = epoch
                best_state = model.store.state_dict()
                since_best = since_decay = 0
                continue
            since_best += 1
            since_decay += 1
            if since_decay >= train_cfg.plateau_patience:
                lr *= train_cfg.lr_decay
                since_decay = 0
                logger.info("validation plateau: learning rate lowered to %.2e", lr)
            if since_best >= train_cfg.early_stop_patience:
                result.stopped_early = True
                logger.info("early stop after %d epochs without improvement", since_best)
                break
    finally:
        if executor is not None:
            executor.shutdown()
        if output_dir is not None:
            write_history(result.history, output_dir / HISTORY_NAME)

    model.store.load_state_dict(best_state)
    logger.info("best validation loss %.5f at epoch %d", result.best_val_loss, result.best_epoch)
    if output_dir is not None:
        result.checkpoint = model.save(
            output_dir / CHECKPOINT_NAME,
            {"best_epoch": result.best_epoch, "best_val_loss": result.best_val_loss},
        )
    return result
