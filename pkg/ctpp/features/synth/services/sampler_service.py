"""
Synthetic point-process samplers with known ground truth.

Every sampler draws from a counter-based Philox stream seeded by the caller,
so a (spec, seed) pair always yields the same realization.
"""

import logging
from typing import Callable, List, Union

import numpy as np

from ctpp.core.enums import Sampler
from ctpp.core.exceptions import EmptyRealization
from ctpp.features.events.schemas.event_schemas import EventSequence
from ctpp.features.synth.schemas.synth_schemas import (
    HawkesSpec,
    LocalMajoritySpec,
    PoissonSpec,
    RenewalSpec,
)

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.SeedSequence]


def make_rng(seed: Seed) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def _sequence(marks: np.ndarray, times: np.ndarray) -> EventSequence:
    return EventSequence.model_construct(marks=marks.astype(int).tolist(), times=times.astype(float).tolist())


def _marks(rng: np.random.Generator, probs: List[float], n: int) -> np.ndarray:
    if len(probs) == 1:
        return np.zeros(n, dtype=int)
    return rng.choice(len(probs), size=n, p=np.asarray(probs))


def sample_poisson(spec: PoissonSpec, seed: Seed) -> EventSequence:
    """Exponential(rate) intervals and categorical marks, either ``count`` events or all events in [0, horizon]."""
    rng = make_rng(seed)
    if spec.count is not None:
        times = np.cumsum(rng.exponential(1.0 / spec.rate, size=spec.count))
    else:
        arrivals = []
        t = rng.exponential(1.0 / spec.rate)
        while t <= spec.horizon:
            arrivals.append(t)
            t += rng.exponential(1.0 / spec.rate)
        if not arrivals:
            raise EmptyRealization(f"no events in [0, {spec.horizon}]")
        times = np.asarray(arrivals)
    return _sequence(_marks(rng, spec.mark_probs, times.size), times)


def sample_hawkes(spec: HawkesSpec, seed: Seed) -> EventSequence:
    """
    Ogata thinning on [0, horizon].

    Between events the exponential kernel only decays, so the intensity right
    after the current time bounds it until the next candidate.
    """
    spec.check_stationary()
    rng = make_rng(seed)
    arrivals = []
    t = 0.0
    excitation = 0.0
    while True:
        upper = spec.mu + excitation
        wait = rng.exponential(1.0 / upper)
        t += wait
        if t > spec.horizon:
            break
        excitation *= np.exp(-spec.decay * wait)
        if rng.uniform() * upper <= spec.mu + excitation:
            arrivals.append(t)
            excitation += spec.alpha
    if not arrivals:
        raise EmptyRealization(f"no events in [0, {spec.horizon}]")
    times = np.asarray(arrivals)
    return _sequence(_marks(rng, spec.mark_probs, times.size), times)


def sample_lognormal_renewal(spec: RenewalSpec, seed: Seed) -> EventSequence:
    rng = make_rng(seed)
    times = np.cumsum(np.exp(rng.normal(spec.log_mean, spec.log_std, size=spec.count)))
    return _sequence(_marks(rng, spec.mark_probs, spec.count), times)


def sample_local_majority(spec: LocalMajoritySpec, seed: Seed) -> EventSequence:
    """
    Mark i+1 is the most frequent mark among events j <= i with t_i - t_j <= window
    (ties to the smaller mark); with probability ``noise`` it is uniform instead.
    """
    rng = make_rng(seed)
    times = np.cumsum(rng.exponential(1.0 / spec.rate, size=spec.count))
    marks = np.empty(spec.count, dtype=int)
    marks[0] = rng.integers(spec.num_marks)
    start = 0
    for i in range(1, spec.count):
        while times[i - 1] - times[start] > spec.window:
            start += 1
        majority = int(np.argmax(np.bincount(marks[start:i], minlength=spec.num_marks)))
        marks[i] = rng.integers(spec.num_marks) if rng.uniform() < spec.noise else majority
    return _sequence(marks, times)


SAMPLERS: dict = {
    Sampler.POISSON: sample_poisson,
    Sampler.HAWKES: sample_hawkes,
    Sampler.RENEWAL: sample_lognormal_renewal,
    Sampler.LOCAL: sample_local_majority,
}


def sample_dataset(sampler: Sampler, spec, n_seqs: int, seed: int) -> List[EventSequence]:
    """
    Draw ``n_seqs`` sequences from independent child streams of ``seed``.

    Empty horizon realizations are skipped and replaced by further child streams.
    """
    draw: Callable[..., EventSequence] = SAMPLERS[Sampler(sampler)]
    root = np.random.SeedSequence(seed)
    sequences: List[EventSequence] = []
    skipped = 0
    while len(sequences) < n_seqs:
        for child in root.spawn(n_seqs - len(sequences)):
            try:
                sequences.append(draw(spec, child))
            except EmptyRealization:
                skipped += 1
    if skipped:
        logger.warning("skipped %d empty realizations", skipped)
    return sequences
