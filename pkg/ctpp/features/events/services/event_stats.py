"""
Dataset statistics and time-scale preprocessing.
"""

import math
from typing import List, Sequence

import numpy as np

from ctpp.core.exceptions import DataValidationError, SpecError
from ctpp.features.events.schemas.event_schemas import Dataset, DatasetStats, EventSequence


def sequence_stats(sequences: Sequence[EventSequence], num_marks: int) -> DatasetStats:
    """Statistics over an explicit list of sequences."""
    if not sequences:
        raise DataValidationError("no sequences")
    intervals = np.concatenate([np.diff(np.asarray(seq.times, dtype=np.float64)) for seq in sequences])
    if intervals.size == 0:
        raise DataValidationError("no intervals: every sequence has a single event")
    lengths = np.array([len(seq) for seq in sequences])
    counts = np.bincount(np.concatenate([np.asarray(seq.marks) for seq in sequences]), minlength=num_marks)
    return DatasetStats(
        delta=float(intervals.mean()),
        min_interval=float(intervals.min()),
        max_interval=float(intervals.max()),
        num_sequences=len(sequences),
        num_events=int(lengths.sum()),
        num_marks=num_marks,
        mean_length=float(lengths.mean()),
        min_length=int(lengths.min()),
        max_length=int(lengths.max()),
        mark_counts=counts.tolist(),
    )


def compute_stats(dataset: Dataset) -> DatasetStats:
    """Statistics of the training split; ``delta`` is its mean inter-event interval."""
    return sequence_stats(dataset.train, dataset.num_marks)


def _scale(sequences: List[EventSequence], factor: float) -> List[EventSequence]:
    # multiplying by a positive constant keeps times ordered and non-negative
    return [
        EventSequence.model_construct(marks=list(seq.marks), times=[t * factor for t in seq.times])
        for seq in sequences
    ]


def rescale_times(dataset: Dataset, factor: float) -> Dataset:
    """
    Multiply every event time by ``factor``.

    Time densities pick up a change of variables: a per-event time NLL on
    the rescaled data equals the original-unit NLL plus ln(factor).
    """
    if not (factor > 0 and math.isfinite(factor)):
        raise SpecError(f"time scale must be a positive finite number, got {factor}")
    if factor == 1.0:
        return dataset
    return Dataset.model_construct(
        train=_scale(dataset.train, factor),
        validation=_scale(dataset.validation, factor),
        test=_scale(dataset.test, factor),
        num_marks=dataset.num_marks,
        time_scale=dataset.time_scale * factor,
    )


def nll_correction(time_scale: float) -> float:
    """Amount to add to a per-event time NLL measured on scaled data to express it in original units."""
    return -math.log(time_scale)
