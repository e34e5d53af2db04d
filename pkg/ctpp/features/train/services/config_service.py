"""
Run configuration files: YAML in, validated RunConfig out.
"""

import logging
from pathlib import Path
from typing import Optional, Union

import yaml
from pydantic import ValidationError

from ctpp.core.exceptions import ConfigError
from ctpp.features.events.schemas.event_schemas import Dataset
from ctpp.features.events.services.event_io import load_dataset
from ctpp.features.events.services.event_stats import compute_stats, rescale_times
from ctpp.features.train.schemas.train_schemas import DataConfig, RunConfig

logger = logging.getLogger(__name__)


def _describe(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        location = ".".join(str(item) for item in error["loc"])
        parts.append(f"{location}: {error['msg']}")
    return "; ".join(parts)


def parse_run_config(document: Optional[dict], base_dir: Optional[Path] = None) -> RunConfig:
    """
    Validate a config mapping and resolve relative paths against ``base_dir``.

    Raises:
        ConfigError: on unknown keys or invalid values
    """
    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError("config must be a mapping with data/model/train sections")
    try:
        config = RunConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_describe(exc)}") from exc
    if base_dir is None:
        return config
    updates = {}
    if config.data is not None:
        updates["data"] = config.data.model_copy(update={
            name: _resolve(getattr(config.data, name), base_dir)
            for name in ("train", "validation", "test")
        })
    if config.output_dir is not None:
        updates["output_dir"] = _resolve(config.output_dir, base_dir)
    return config.model_copy(update=updates)


def _resolve(path: Path, base_dir: Path) -> Path:
    return path if path.is_absolute() else (base_dir / path).resolve()


def load_run_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        document = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    return parse_run_config(document, path.parent)


def dump_run_config(config: RunConfig) -> str:
    """YAML text of ``config``; loading it back gives the same RunConfig."""
    document = config.model_dump(mode="json")
    document["model"]["horizons"] = [float(eta) for eta in config.model.horizons]
    return yaml.safe_dump(document, sort_keys=False)


def default_config_text() -> str:
    return dump_run_config(RunConfig())


def load_config_dataset(data: Optional[DataConfig]) -> Dataset:
    """
    Read the three splits named by ``data``.

    With ``auto_time_scale`` the times are divided by the training split's
    mean interval, so delta becomes 1 in model units.
    """
    if data is None:
        raise ConfigError("config has no data section")
    dataset = load_dataset(
        data.train, data.validation, data.test,
        num_marks=data.num_marks,
        max_length=data.max_length,
        time_scale=1.0 if data.auto_time_scale else data.time_scale,
    )
    if data.auto_time_scale:
        delta = compute_stats(dataset).delta
        logger.info("auto time scale: dividing times by delta = %.6g", delta)
        dataset = rescale_times(dataset, 1.0 / delta)
    return dataset
