"""
Padding of variable-length sequences into dense batches.
"""

from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import numpy as np

from ctpp.features.events.schemas.event_schemas import EventSequence


@dataclass(frozen=True)
class Batch:
    """
    Dense (B, L) view of a group of sequences.

    ``intervals[b, i]`` is ``t_i - t_{i-1}`` with ``t_0 = 0``; padded slots
    have mark 0, time 0, interval 0 and ``mask`` False.
    """

    marks: np.ndarray
    times: np.ndarray
    intervals: np.ndarray
    mask: np.ndarray

    @property
    def size(self) -> int:
        return self.marks.shape[0]

    @property
    def max_length(self) -> int:
        return self.marks.shape[1]

    @property
    def lengths(self) -> np.ndarray:
        return self.mask.sum(axis=1)


def make_batch(sequences: Sequence[EventSequence], pad_to: Optional[int] = None) -> Batch:
    length = max(len(seq) for seq in sequences)
    if pad_to is not None:
        length = max(length, pad_to)
    marks = np.zeros((len(sequences), length), dtype=np.int64)
    times = np.zeros((len(sequences), length), dtype=np.float64)
    intervals = np.zeros((len(sequences), length), dtype=np.float64)
    mask = np.zeros((len(sequences), length), dtype=bool)
    for row, seq in enumerate(sequences):
        n = len(seq)
        marks[row, :n] = seq.marks
        times[row, :n] = seq.times
        intervals[row, :n] = np.diff(times[row, :n], prepend=0.0)
        mask[row, :n] = True
    return Batch(marks=marks, times=times, intervals=intervals, mask=mask)


def iter_batches(
    sequences: Sequence[EventSequence],
    batch_size: int,
    rng: Optional[np.random.Generator] = None,
) -> Iterator[List[EventSequence]]:
    """Yield groups of sequences; shuffled when a generator is given."""
    order = np.arange(len(sequences))
    if rng is not None:
        order = rng.permutation(len(sequences))
    for start in range(0, len(order), batch_size):
        yield [sequences[i] for i in order[start:start + batch_size]]
