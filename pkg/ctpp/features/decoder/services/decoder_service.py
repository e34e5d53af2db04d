"""
Decoders from hidden states to next-event distributions and predictions.
"""

import math
from typing import Tuple, Union

import numpy as np

from ctpp.core.exceptions import DomainError
from ctpp.core.nncore import tensor as T
from ctpp.core.nncore.layers import linear, log_softmax
from ctpp.core.nncore.tensor import Tensor
from ctpp.features.decoder.models.decoder_model import DistDecoder, PredDecoder
from ctpp.features.decoder.schemas.decoder_schemas import MixtureParams

LOG_SCALE_LIMIT = 10.0
INTERVAL_FLOOR = 1e-8
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

Decoder = Union[DistDecoder, PredDecoder]


def mark_logits(h: Tensor, decoder: Decoder) -> Tensor:
    return linear(h, decoder.w_pi, decoder.b_pi)


def mark_log_probs(h: Tensor, decoder: Decoder) -> Tensor:
    """Categorical log-probabilities of the next mark: log_softmax(h W_pi)."""
    return log_softmax(mark_logits(h, decoder))


def mixture_params(h: Tensor, decoder: DistDecoder) -> MixtureParams:
    """w = softmax(h W_w + b_w), log sigma = clamp(h W_s + b_s), mu = h W_mu + b_mu."""
    return MixtureParams(
        log_weights=log_softmax(linear(h, decoder.w_w, decoder.b_w)),
        log_scales=T.clamp(linear(h, decoder.w_s, decoder.b_s), -LOG_SCALE_LIMIT, LOG_SCALE_LIMIT),
        locs=linear(h, decoder.w_mu, decoder.b_mu),
    )


def lognormmix_logpdf(tau: np.ndarray, params: MixtureParams) -> Tensor:
    """
    log sum_k w_k LogNormal(tau; mu_k, sigma_k), evaluated with log-sum-exp.

    Raises:
        DomainError: if any interval is not strictly positive
    """
    tau = np.asarray(tau, dtype=np.float64)
    if not np.all(tau > 0):
        raise DomainError("log-normal mixture density needs strictly positive intervals")
    log_tau = np.log(tau)[..., None]
    standardized = (log_tau - params.locs) * (-params.log_scales).exp()
    components = (
        params.log_weights
        - params.log_scales
        - 0.5 * standardized.square()
        - HALF_LOG_2PI
        - log_tau
    )
    return T.logsumexp(components, axis=-1)


def floor_intervals(intervals: np.ndarray) -> np.ndarray:
    """Zero intervals (simultaneous events) are lifted to INTERVAL_FLOOR before taking logs."""
    return np.maximum(np.asarray(intervals, dtype=np.float64), INTERVAL_FLOOR)


def mixture_mean(params: MixtureParams) -> np.ndarray:
    """Expected interval sum_k w_k exp(mu_k + sigma_k^2 / 2)."""
    return np.sum(params.weights * np.exp(params.means + 0.5 * params.scales ** 2), axis=-1)


def predicted_intervals(h: Tensor, decoder: PredDecoder) -> Tensor:
    """exp(h W_t + b_t), squeezed over the last axis."""
    out = linear(h, decoder.w_t, decoder.b_t).exp()
    return out.reshape(out.shape[:-1])


def sample_next(
    h: np.ndarray, t_last: float, decoder: DistDecoder, seed: Union[int, np.random.SeedSequence]
) -> Tuple[int, float]:
    """
    Draw the next (mark, time) from the decoded distribution.

    z ~ Categorical(w), r ~ Normal(mu_z, sigma_z), time = t_last + exp(r);
    the mark is drawn independently from softmax(h W_pi).
    """
    rng = np.random.Generator(np.random.Philox(seed))
    with T.no_grad():
        h = T.Tensor(np.asarray(h, dtype=np.float64))
        params = mixture_params(h, decoder)
        mark_probs = np.exp(mark_log_probs(h, decoder).data)
    weights = params.weights / params.weights.sum()
    component = rng.choice(weights.size, p=weights)
    r = rng.normal(params.means[component], params.scales[component])
    mark = int(rng.choice(mark_probs.size, p=mark_probs / mark_probs.sum()))
    return mark, float(t_last + np.exp(r))


def predict_next(h: np.ndarray, t_last: float, decoder: PredDecoder) -> Tuple[int, float]:
    """Highest-scoring mark and t_last + exp(h W_t + b_t)."""
    with T.no_grad():
        h = T.Tensor(np.asarray(h, dtype=np.float64))
        logits = mark_logits(h, decoder).data
        interval = predicted_intervals(h, decoder).data
    return int(np.argmax(logits)), float(t_last + interval)
