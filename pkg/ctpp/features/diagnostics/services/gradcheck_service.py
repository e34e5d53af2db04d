"""
Gradient verification of the full CTPP objective on tiny random instances.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from ctpp.core.enums import Mode
from ctpp.core.exceptions import GradCheckFailed, UsageError
from ctpp.core.nncore.gradcheck import grad_check
from ctpp.features.events.schemas.event_schemas import EventSequence
from ctpp.features.events.services.batching import make_batch
from ctpp.features.train.models.ctpp_model import CtppModel
from ctpp.features.train.schemas.train_schemas import ModelConfig
from ctpp.features.train.services.loss_service import nll_loss, pred_loss

logger = logging.getLogger(__name__)

MAX_DIM = 8
MAX_LENGTH = 6
TOLERANCE = 1e-4
# finite differences of an O(1) loss carry ~1e-10 absolute roundoff, so the
# strict DENOMINATOR_FLOOR flags near-zero entries; pass it explicitly to use it
ERROR_FLOOR = 1e-5
DEFAULT_SEEDS = (0, 1, 2, 3, 4)


def tiny_model_config() -> ModelConfig:
    """d = 4, d_h = 8, two layers of two channels, three mixture components."""
    return ModelConfig(
        embed_dim=4,
        hidden_dim=8,
        num_layers=2,
        horizons=[1.0, 2.5],
        horizon_unit="absolute",
        siren_hidden=[8, 8, 8],
        num_components=3,
    )


def tiny_sequences(seed: int, num_marks: int = 3, length: int = 5, count: int = 2) -> List[EventSequence]:
    """Random sequences with exponential gaps, the last one a single event shorter."""
    rng = np.random.Generator(np.random.Philox(seed))
    sequences = []
    for index in range(count):
        n = max(length - index, 1)
        times = np.cumsum(rng.exponential(1.0, size=n))
        marks = rng.integers(0, num_marks, size=n)
        sequences.append(EventSequence(marks=marks.tolist(), times=times.tolist()))
    return sequences


@dataclass
class GradCheckReport:
    tolerance: float = TOLERANCE
    floor: float = ERROR_FLOOR
    # mode -> parameter group -> max relative error over seeds
    errors: Dict[str, Dict[str, float]] = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return max((e for groups in self.errors.values() for e in groups.values()), default=0.0)

    @property
    def failures(self) -> List[str]:
        return [
            f"{mode}/{group}"
            for mode, groups in self.errors.items()
            for group, error in groups.items()
            if not error < self.tolerance
        ]

    @property
    def passed(self) -> bool:
        return not self.failures

    def raise_for_failure(self) -> None:
        if not self.passed:
            raise GradCheckFailed(
                f"gradient check failed (tolerance {self.tolerance:g}, floor {self.floor:g}) "
                f"for: {', '.join(self.failures)}"
            )


def check_model_gradients(
    config: ModelConfig,
    mode: Mode,
    seed: int,
    num_marks: int = 3,
    length: int = 5,
    beta: float = 0.3,
    h: float = 1e-5,
    max_entries: Optional[int] = None,
    floor: float = ERROR_FLOOR,
) -> Dict[str, float]:
    """Max relative error per parameter group for one freshly initialized model."""
    if config.embed_dim > MAX_DIM or config.hidden_dim > MAX_DIM:
        raise UsageError(f"gradcheck needs d and d_h of at most {MAX_DIM}")
    if length > MAX_LENGTH:
        raise UsageError(f"gradcheck needs sequences of at most {MAX_LENGTH} events")
    model = CtppModel(config, num_marks, mode, horizons=config.horizons, seed=seed, beta=beta)
    batch = make_batch(tiny_sequences(seed, num_marks, length))

    if mode == Mode.PROBABILISTIC:
        def loss_fn():
            return nll_loss(model, batch, score_first_event=True)
    else:
        def loss_fn():
            return pred_loss(model, batch, beta, score_first_event=True)

    rng = np.random.Generator(np.random.Philox(seed))
    result = grad_check(loss_fn, model.store, h=h, max_entries=max_entries, rng=rng, floor=floor)
    return result.per_group(model.store)


def run_gradcheck(
    config: Optional[ModelConfig] = None,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    modes: Sequence[Mode] = (Mode.PROBABILISTIC, Mode.PREDICTION),
    tolerance: float = TOLERANCE,
    max_entries: Optional[int] = None,
    floor: float = ERROR_FLOOR,
) -> GradCheckReport:
    """
    Check both objectives over several seeds.

    Horizons in ``config`` are taken as absolute time units. ``floor`` is the
    smallest relative-error denominator; DENOMINATOR_FLOOR gives the strict check.
    """
    config = config or tiny_model_config()
    report = GradCheckReport(tolerance=tolerance, floor=floor)
    for mode in modes:
        groups = report.errors.setdefault(Mode(mode).value, {})
        for seed in seeds:
            for group, error in check_model_gradients(
                config, Mode(mode), seed, max_entries=max_entries, floor=floor
            ).items():
                groups[group] = max(groups.get(group, 0.0), error)
        logger.info("gradcheck %s: max relative error %.3e", Mode(mode).value, max(groups.values()))
    return report
