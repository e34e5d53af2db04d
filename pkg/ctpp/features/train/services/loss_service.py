"""
Training objectives for both decoder modes.

Losses are sums over the scored events of a batch; callers divide by the
event count so that shards of a batch can be reduced before normalizing.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ctpp.core.enums import Mode
from ctpp.core.nncore import tensor as T
from ctpp.core.nncore.tensor import Tensor
from ctpp.features.decoder.services.decoder_service import (
    floor_intervals,
    mark_log_probs,
    mixture_params,
    lognormmix_logpdf,
    predicted_intervals,
)
from ctpp.features.events.services.batching import Batch
from ctpp.features.train.models.ctpp_model import CtppModel
from ctpp.features.train.schemas.train_schemas import TrainConfig


@dataclass
class NllTerms:
    mark_nll: Tensor
    time_nll: Tensor
    count: int


@dataclass
class PredTerms:
    cross_entropy: Tensor
    squared_error: Tensor
    count: int


def target_mask(batch: Batch, score_first_event: bool = False) -> np.ndarray:
    """Real events that are scored; the first event of each sequence only on request."""
    mask = batch.mask.copy()
    if not score_first_event:
        mask[:, 0] = False
    return mask


def nll_terms(model: CtppModel, batch: Batch, score_first_event: bool = False) -> NllTerms:
    """Summed mark and interval negative log-likelihoods over scored events."""
    weights = target_mask(batch, score_first_event).astype(np.float64)
    history = model.history_states(batch)
    mark_lp = T.pick(mark_log_probs(history, model.decoder), batch.marks)
    time_lp = lognormmix_logpdf(floor_intervals(batch.intervals), mixture_params(history, model.decoder))
    return NllTerms(
        mark_nll=-(mark_lp * weights).sum(),
        time_nll=-(time_lp * weights).sum(),
        count=int(weights.sum()),
    )


def pred_terms(model: CtppModel, batch: Batch, score_first_event: bool = False) -> PredTerms:
    """Summed mark cross-entropy and squared next-time error over scored events."""
    weights = target_mask(batch, score_first_event).astype(np.float64)
    history = model.history_states(batch)
    mark_lp = T.pick(mark_log_probs(history, model.decoder), batch.marks)
    # (t_prev + pred) - t_i reduces to the interval error
    error = predicted_intervals(history, model.decoder) - batch.intervals
    return PredTerms(
        cross_entropy=-(mark_lp * weights).sum(),
        squared_error=(error.square() * weights).sum(),
        count=int(weights.sum()),
    )


def objective_sum(model: CtppModel, batch: Batch, config: TrainConfig) -> Tuple[Tensor, int]:
    """Unnormalized loss of the configured mode and the number of events it covers."""
    if config.mode == Mode.PROBABILISTIC:
        terms = nll_terms(model, batch, config.score_first_event)
        return terms.mark_nll + terms.time_nll, terms.count
    terms = pred_terms(model, batch, config.score_first_event)
    return terms.cross_entropy + config.beta * terms.squared_error, terms.count


def nll_loss(model: CtppModel, batch: Batch, score_first_event: bool = False) -> Tensor:
    """Per-event negative log-likelihood."""
    terms = nll_terms(model, batch, score_first_event)
    return (terms.mark_nll + terms.time_nll) / max(terms.count, 1)


def pred_loss(model: CtppModel, batch: Batch, beta: float, score_first_event: bool = False) -> Tensor:
    """Per-event cross-entropy plus beta times the squared time error."""
    terms = pred_terms(model, batch, score_first_event)
    return (terms.cross_entropy + beta * terms.squared_error) / max(terms.count, 1)
