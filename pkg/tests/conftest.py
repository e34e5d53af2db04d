"""Shared fixtures for the CTPP test suite."""

import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from ctpp.core.enums import KernelMode, Mode
from ctpp.features.events.schemas.event_schemas import Dataset, EventSequence
from ctpp.features.train.models.ctpp_model import CtppModel
from ctpp.features.train.schemas.train_schemas import ModelConfig, TrainConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config():
    return ModelConfig(
        embed_dim=4,
        hidden_dim=6,
        num_layers=1,
        horizons=[1.0, 2.0],
        horizon_unit="absolute",
        siren_hidden=[6, 6],
        num_components=3,
    )


@pytest.fixture
def tiny_train_config():
    return TrainConfig(max_epochs=3, batch_size=4, seed=0, plateau_patience=1, early_stop_patience=2)


def random_sequences(seed, count, num_marks=3, min_length=2, max_length=8, rate=1.0):
    gen = np.random.default_rng(seed)
    sequences = []
    for _ in range(count):
        n = int(gen.integers(min_length, max_length + 1))
        times = np.cumsum(gen.exponential(1.0 / rate, size=n))
        marks = gen.integers(0, num_marks, size=n)
        sequences.append(EventSequence(marks=marks.tolist(), times=times.tolist()))
    return sequences


@pytest.fixture
def toy_sequences():
    return random_sequences(7, 6)


@pytest.fixture
def toy_dataset():
    return Dataset(
        train=random_sequences(1, 8),
        validation=random_sequences(2, 4),
        test=random_sequences(3, 4),
        num_marks=3,
    )


@pytest.fixture
def prob_model(tiny_config):
    return CtppModel(tiny_config, num_marks=3, mode=Mode.PROBABILISTIC, horizons=tiny_config.horizons, seed=0)


@pytest.fixture
def pred_model(tiny_config):
    return CtppModel(tiny_config, num_marks=3, mode=Mode.PREDICTION, horizons=tiny_config.horizons, seed=0)


@pytest.fixture
def depthwise_config(tiny_config):
    return tiny_config.model_copy(update={"kernel_mode": KernelMode.DEPTHWISE})


def write_jsonl(path: Path, sequences) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for seq in sequences:
            handle.write(json.dumps({"marks": list(seq.marks), "times": list(seq.times)}) + "\n")
    return path


@pytest.fixture
def dataset_files(tmp_path):
    """Three split files plus a matching run config on disk."""
    files = {
        "train": write_jsonl(tmp_path / "data" / "train.jsonl", random_sequences(11, 10)),
        "validation": write_jsonl(tmp_path / "data" / "val.jsonl", random_sequences(12, 4)),
        "test": write_jsonl(tmp_path / "data" / "test.jsonl", random_sequences(13, 4)),
    }
    return files


@pytest.fixture
def run_config_file(tmp_path, dataset_files):
    document = {
        "data": {
            "train": "data/train.jsonl",
            "validation": "data/val.jsonl",
            "test": "data/test.jsonl",
            "num_marks": 3,
        },
        "model": {
            "embed_dim": 4,
            "hidden_dim": 6,
            "horizons": [1.0, 3.0],
            "siren_hidden": [6, 6],
            "num_components": 2,
        },
        "train": {"max_epochs": 2, "batch_size": 4, "seed": 3},
    }
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(document), encoding="utf-8")
    return path
