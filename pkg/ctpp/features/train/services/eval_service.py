"""
Evaluation metrics for trained checkpoints.
"""

import logging
import math
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ctpp.core.enums import Mode
from ctpp.core.exceptions import EvaluationError, UsageError
from ctpp.core.nncore import tensor as T
from ctpp.features.decoder.services.decoder_service import (
    floor_intervals,
    lognormmix_logpdf,
    mark_log_probs,
    mark_logits,
    mixture_mean,
    mixture_params,
    predicted_intervals,
)
from ctpp.features.events.schemas.event_schemas import EventSequence
from ctpp.features.events.services.batching import iter_batches, make_batch
from ctpp.features.events.services.event_stats import nll_correction
from ctpp.features.train.models.ctpp_model import CtppModel
from ctpp.features.train.schemas.train_schemas import Metrics
from ctpp.features.train.services.loss_service import target_mask

logger = logging.getLogger(__name__)


def _probabilistic_metrics(model, sequences, batch_size, score_first_event) -> Metrics:
    mark_nll = time_nll = squared = 0.0
    count = 0
    for group in iter_batches(sequences, batch_size):
        batch = make_batch(group)
        weights = target_mask(batch, score_first_event)
        history = model.history_states(batch)
        params = mixture_params(history, model.decoder)
        mark_lp = T.pick(mark_log_probs(history, model.decoder), batch.marks).data
        time_lp = lognormmix_logpdf(floor_intervals(batch.intervals), params).data
        mark_nll -= float(mark_lp[weights].sum())
        time_nll -= float(time_lp[weights].sum())
        squared += float(((mixture_mean(params) - batch.intervals)[weights] ** 2).sum())
        count += int(weights.sum())
    if count == 0:
        raise UsageError("no scored events to evaluate")
    correction = nll_correction(model.time_scale)
    metrics = Metrics(
        mode=Mode.PROBABILISTIC,
        num_events=count,
        time_scale=model.time_scale,
        nll=(mark_nll + time_nll) / count,
        mark_nll=mark_nll / count,
        time_nll=time_nll / count,
        nll_correction=correction,
        time_nll_original_units=time_nll / count + correction,
        rmse_mixture_mean=math.sqrt(squared / count),
    )
    if not math.isfinite(metrics.nll):
        raise EvaluationError("negative log-likelihood is not finite")
    return metrics


def _prediction_metrics(model, sequences, batch_size, score_first_event) -> Metrics:
    cross_entropy = squared = 0.0
    correct = count = 0
    for group in iter_batches(sequences, batch_size):
        batch = make_batch(group)
        weights = target_mask(batch, score_first_event)
        history = model.history_states(batch)
        logits = mark_logits(history, model.decoder)
        mark_lp = T.pick(T.log_softmax(logits), batch.marks).data
        predicted = predicted_intervals(history, model.decoder).data
        cross_entropy -= float(mark_lp[weights].sum())
        squared += float(((predicted - batch.intervals)[weights] ** 2).sum())
        correct += int((np.argmax(logits.data, axis=-1) == batch.marks)[weights].sum())
        count += int(weights.sum())
    if count == 0:
        raise UsageError("no scored events to evaluate")
    rmse = math.sqrt(squared / count)
    return Metrics(
        mode=Mode.PREDICTION,
        num_events=count,
        time_scale=model.time_scale,
        loss=(cross_entropy + model.beta * squared) / count,
        accuracy=100.0 * correct / count,
        rmse=rmse,
        rmse_original_units=rmse / model.time_scale,
    )


def evaluate(
    model: CtppModel,
    sequences: Sequence[EventSequence],
    expected_mode: Optional[Mode] = None,
    batch_size: int = 64,
    score_first_event: bool = False,
) -> Metrics:
    """
    Per-event metrics over ``sequences``, scored with teacher forcing.

    Probabilistic checkpoints report NLLs (with the time-scale correction)
    and the mixture-mean RMSE; prediction checkpoints report accuracy in
    percent and the next-time RMSE.

    Raises:
        UsageError: if ``expected_mode`` differs from the checkpoint's mode
    """
    if expected_mode is not None and Mode(expected_mode) != model.mode:
        raise UsageError(
            f"checkpoint was trained in {model.mode.value} mode, {Mode(expected_mode).value} metrics requested"
        )
    sequences = list(sequences)
    with T.no_grad():
        if model.mode == Mode.PROBABILISTIC:
            metrics = _probabilistic_metrics(model, sequences, batch_size, score_first_event)
        else:
            metrics = _prediction_metrics(model, sequences, batch_size, score_first_event)
    logger.info("evaluated %d events in %s mode", metrics.num_events, metrics.mode.value)
    return metrics


def evaluate_checkpoint(
    path: Union[str, Path],
    sequences: Sequence[EventSequence],
    expected_mode: Optional[Mode] = None,
    score_first_event: bool = False,
) -> Metrics:
    return evaluate(
        CtppModel.from_checkpoint(path), sequences, expected_mode, score_first_event=score_first_event
    )
