import math
from typing import List

from pydantic import BaseModel, ConfigDict, Field, StrictInt, field_validator, model_validator


class Event(BaseModel):
    """A single (mark, time) pair."""

    model_config = ConfigDict(frozen=True)

    mark: int = Field(ge=0)
    time: float = Field(ge=0.0)


class SequenceRecord(BaseModel):
    """Schema for one JSON Lines record as it appears on disk."""

    marks: List[StrictInt]
    times: List[float]

    @model_validator(mode="after")
    def check_lengths(self) -> "SequenceRecord":
        if len(self.marks) != len(self.times):
            raise ValueError(f"marks has {len(self.marks)} entries but times has {len(self.times)}")
        if not self.marks:
            raise ValueError("empty sequence")
        return self


class EventSequence(BaseModel):
    """
    Ordered events on a continuous timeline, stored column-wise.

    Times are absolute, finite, non-negative and non-decreasing; simultaneous events
    keep their file order.
    """

    model_config = ConfigDict(frozen=True)

    marks: List[int] = Field(min_length=1)
    times: List[float] = Field(min_length=1)

    @field_validator("marks")
    @classmethod
    def check_marks(cls, marks: List[int]) -> List[int]:
        if min(marks) < 0:
            raise ValueError("marks must be non-negative")
        return marks

    @field_validator("times")
    @classmethod
    def check_times(cls, times: List[float]) -> List[float]:
        if not all(math.isfinite(t) for t in times):
            raise ValueError("times must be finite")
        if times[0] < 0:
            raise ValueError("times must be non-negative")
        for i in range(1, len(times)):
            if times[i] < times[i - 1]:
                raise ValueError(f"times decrease at position {i}: {times[i - 1]} > {times[i]}")
        return times

    @model_validator(mode="after")
    def check_lengths(self) -> "EventSequence":
        if len(self.marks) != len(self.times):
            raise ValueError("marks and times differ in length")
        return self

    def __len__(self) -> int:
        return len(self.marks)

    @property
    def events(self) -> List[Event]:
        return [Event(mark=m, time=t) for m, t in zip(self.marks, self.times)]

    def intervals(self) -> List[float]:
        """Consecutive inter-event intervals (length L - 1)."""
        return [b - a for a, b in zip(self.times, self.times[1:])]


class Dataset(BaseModel):
    """Train/validation/test splits over a shared mark vocabulary."""

    model_config = ConfigDict(frozen=True)

    train: List[EventSequence]
    validation: List[EventSequence] = []
    test: List[EventSequence] = []
    num_marks: int = Field(ge=1)
    time_scale: float = Field(default=1.0, gt=0.0)

    @model_validator(mode="after")
    def check_marks(self) -> "Dataset":
        for split in (self.train, self.validation, self.test):
            for seq in split:
                if max(seq.marks) >= self.num_marks:
                    raise ValueError(f"mark {max(seq.marks)} outside [0, {self.num_marks})")
        return self

    def split(self, name: str) -> List[EventSequence]:
        aliases = {"train": self.train, "val": self.validation, "validation": self.validation, "test": self.test}
        if name not in aliases:
            raise KeyError(name)
        return aliases[name]


class DatasetStats(BaseModel):
    """Interval statistics (delta is the mean inter-event time) and dataset summary counts."""

    delta: float
    min_interval: float
    max_interval: float
    num_sequences: int
    num_events: int
    num_marks: int
    mean_length: float
    min_length: int
    max_length: int
    mark_counts: List[int]
