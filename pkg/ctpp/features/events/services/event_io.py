"""
JSON Lines ingestion and serialization of event sequences.
One sequence per line: {"marks": [int, ...], "times": [float, ...]}.
"""

import json
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Union

from pydantic import ValidationError

from ctpp.core.exceptions import DataFormatError, DataValidationError
from ctpp.features.events.schemas.event_schemas import Dataset, EventSequence, SequenceRecord
from ctpp.features.events.services.event_stats import rescale_times

logger = logging.getLogger(__name__)

DEFAULT_MAX_LENGTH = 256


def _first_error(exc: ValidationError) -> str:
    error = exc.errors()[0]
    location = ".".join(str(part) for part in error.get("loc", ()))
    return f"{location}: {error['msg']}" if location else error["msg"]


def read_sequences(
    path: Union[str, Path],
    num_marks: int,
    max_length: Optional[int] = DEFAULT_MAX_LENGTH,
) -> List[EventSequence]:
    """
    Parse and validate every record of a JSON Lines file.

    Sequences longer than ``max_length`` keep their first ``max_length`` events.

    Raises:
        DataFormatError: a line is not a well-formed record
        DataValidationError: a record breaks an event-sequence invariant
    """
    path = Path(path)
    sequences: List[EventSequence] = []
    truncated = 0
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = SequenceRecord.model_validate(json.loads(line))
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path.name}: invalid JSON ({exc.msg})", line_number) from exc
            except ValidationError as exc:
                raise DataFormatError(f"{path.name}: {_first_error(exc)}", line_number) from exc

            bad = [m for m in record.marks if m >= num_marks]
            if bad:
                raise DataValidationError(
                    f"{path.name} line {line_number}: mark {bad[0]} outside [0, {num_marks})"
                )
            marks, times = record.marks, record.times
            if max_length is not None and len(marks) > max_length:
                marks, times = marks[:max_length], times[:max_length]
                truncated += 1
            try:
                sequences.append(EventSequence(marks=marks, times=times))
            except ValidationError as exc:
                raise DataValidationError(f"{path.name} line {line_number}: {_first_error(exc)}") from exc

    if truncated:
        logger.info("%s: truncated %d sequences to %d events", path.name, truncated, max_length)
    return sequences


def load_jsonl(
    path: Union[str, Path],
    num_marks: int,
    max_length: Optional[int] = DEFAULT_MAX_LENGTH,
) -> Dataset:
    """Load one file as a single-split dataset (sequences land in ``train``)."""
    return Dataset(train=read_sequences(path, num_marks, max_length), num_marks=num_marks)


def load_dataset(
    train_path: Union[str, Path],
    val_path: Union[str, Path],
    test_path: Union[str, Path],
    num_marks: int,
    max_length: Optional[int] = DEFAULT_MAX_LENGTH,
    time_scale: float = 1.0,
) -> Dataset:
    """Load the three splits, check they share no sequence and apply the time scale."""
    splits = {
        name: read_sequences(p, num_marks, max_length)
        for name, p in (("train", train_path), ("validation", val_path), ("test", test_path))
    }
    seen = {}
    for name, sequences in splits.items():
        for seq in sequences:
            key = (tuple(seq.marks), tuple(seq.times))
            if key in seen and seen[key] != name:
                raise DataValidationError(f"a sequence appears in both {seen[key]} and {name}")
            seen[key] = name
    dataset = Dataset(num_marks=num_marks, **splits)
    logger.info(
        "loaded %d/%d/%d sequences (K=%d)",
        len(dataset.train), len(dataset.validation), len(dataset.test), num_marks,
    )
    if time_scale != 1.0:
        dataset = rescale_times(dataset, time_scale)
    return dataset


def dump_jsonl(sequences: Iterable[EventSequence], path: Union[str, Path]) -> Path:
    """Write sequences in the JSON Lines format read by :func:`read_sequences`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for seq in sequences:
            handle.write(json.dumps({"marks": list(seq.marks), "times": list(seq.times)}) + "\n")
    return path
