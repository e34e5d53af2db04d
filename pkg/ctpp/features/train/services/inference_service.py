"""
Next-event prediction and autoregressive sampling from trained models.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ctpp.core.enums import Mode
from ctpp.core.exceptions import UsageError
from ctpp.core.nncore import tensor as T
from ctpp.features.decoder.services.decoder_service import (
    mark_logits,
    mixture_mean,
    mixture_params,
    predict_next,
    sample_next,
)
from ctpp.features.events.schemas.event_schemas import EventSequence
from ctpp.features.events.services.batching import make_batch
from ctpp.features.train.models.ctpp_model import CtppModel

logger = logging.getLogger(__name__)


def last_states(model: CtppModel, sequences: Sequence[EventSequence]) -> np.ndarray:
    """h_L of every sequence, shape (B, d_h); zeros for a constant-history model."""
    batch = make_batch(list(sequences))
    if model.config.constant_history:
        return np.zeros((batch.size, model.config.hidden_dim))
    with T.no_grad():
        states = model.encode(batch).data
    return states[np.arange(batch.size), batch.lengths - 1]


def predict_sequences(model: CtppModel, sequences: Sequence[EventSequence]) -> List[Tuple[int, float]]:
    """
    Predicted (mark, time) of the event following each sequence.

    Prediction checkpoints use their direct heads; probabilistic checkpoints
    answer with the most likely mark and the mixture's expected interval.
    """
    if not sequences:
        return []
    states = last_states(model, sequences)
    predictions = []
    for h, seq in zip(states, sequences):
        t_last = seq.times[-1]
        if model.mode == Mode.PREDICTION:
            predictions.append(predict_next(h, t_last, model.decoder))
            continue
        with T.no_grad():
            h_t = T.Tensor(h)
            mark = int(np.argmax(mark_logits(h_t, model.decoder).data))
            interval = float(mixture_mean(mixture_params(h_t, model.decoder)))
        predictions.append((mark, t_last + interval))
    return predictions


def sample_sequence(
    model: CtppModel,
    history: Optional[EventSequence],
    num_events: int,
    seed: int,
) -> EventSequence:
    """
    Continue ``history`` by ``num_events`` draws, each conditioned on all events so far.

    An empty history starts from h_0 = 0 at time 0. Returns only the new events.
    """
    if model.mode != Mode.PROBABILISTIC:
        raise UsageError("sampling needs a probabilistic checkpoint")
    if num_events < 1:
        raise UsageError(f"number of events to sample must be positive, got {num_events}")
    marks = list(history.marks) if history is not None else []
    times = list(history.times) if history is not None else []
    for step_seed in np.random.SeedSequence(seed).spawn(num_events):
        if marks:
            current = EventSequence.model_construct(marks=marks, times=times)
            h, t_last = last_states(model, [current])[0], times[-1]
        else:
            h, t_last = np.zeros(model.config.hidden_dim), 0.0
        mark, time = sample_next(h, t_last, model.decoder, step_seed)
        marks.append(mark)
        times.append(time)
    start = len(history) if history is not None else 0
    logger.debug("sampled %d events after %d history events", num_events, start)
    return EventSequence.model_construct(marks=marks[start:], times=times[start:])
