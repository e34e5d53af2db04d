"""
The full CTPP network: mark embedding, local convolutional stack,
global GRU and one of the two decoders, all in a single ParamStore.
"""

import logging
import math
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from ctpp.core.enums import Mode
from ctpp.core.exceptions import UsageError
from ctpp.core.nncore import tensor as T
from ctpp.core.nncore.params import ParamStore, load_checkpoint, save_checkpoint
from ctpp.core.nncore.tensor import Tensor
from ctpp.features.decoder.models.decoder_model import DistDecoder, PredDecoder
from ctpp.features.encoder.models.encoder_model import (
    EmbeddingTable,
    GlobalEncoder,
    LocalEncoderLayer,
    LocalEncoderStack,
)
from ctpp.features.encoder.services.encoder_service import embed, global_encode, local_encode
from ctpp.features.events.services.batching import Batch
from ctpp.features.train.schemas.train_schemas import ModelConfig

logger = logging.getLogger(__name__)


def resolve_horizons(config: ModelConfig, delta: float) -> List[float]:
    """Channel horizons in time units; multiples of delta unless the config says absolute."""
    if config.horizon_unit == "absolute":
        return [float(eta) for eta in config.horizons]
    if not (delta > 0 and math.isfinite(delta)):
        raise UsageError(f"horizons relative to delta need a positive mean interval, got {delta}")
    return [float(eta) * delta for eta in config.horizons]


class CtppModel:
    def __init__(
        self,
        config: ModelConfig,
        num_marks: int,
        mode: Mode,
        horizons: List[float],
        seed: int = 0,
        ablate_local: bool = False,
        beta: float = 0.3,
        time_scale: float = 1.0,
    ):
        self.config = config
        self.num_marks = num_marks
        self.mode = Mode(mode)
        self.horizons = [float(eta) for eta in horizons]
        self.seed = seed
        self.ablate_local = ablate_local
        self.beta = beta
        self.time_scale = time_scale

        rng = np.random.Generator(np.random.Philox(seed))
        self.store = ParamStore()
        self.embedding = EmbeddingTable(self.store, num_marks, config.embed_dim, rng)
        num_layers = 0 if ablate_local else config.num_layers
        self.local = LocalEncoderStack([
            LocalEncoderLayer(
                self.store, n, config.embed_dim, self.horizons, rng,
                hidden_sizes=config.siren_hidden,
                omega_0=config.omega_0,
                kernel_mode=config.kernel_mode,
                ln_eps=config.ln_eps,
            )
            for n in range(num_layers)
        ])
        self.global_encoder = GlobalEncoder(
            self.store, config.embed_dim, config.hidden_dim, rng, config.time_transform
        )
        if self.mode == Mode.PROBABILISTIC:
            self.decoder = DistDecoder(
                self.store, config.hidden_dim, num_marks, config.num_components, rng, config.mark_bias
            )
        else:
            self.decoder = PredDecoder(self.store, config.hidden_dim, num_marks, rng, config.mark_bias)
        logger.debug(
            "built %s model: %d local layers, %d parameters",
            self.mode.value, len(self.local), self.store.num_values(),
        )

    def encode(self, batch: Batch) -> Tensor:
        """Hidden states h_1..h_L, shape (B, L, d_h)."""
        features = embed(batch.marks, self.embedding)
        features = local_encode(features, batch.times, self.local, batch.mask)
        return global_encode(features, batch.intervals, self.global_encoder)

    def history_states(self, batch: Batch) -> Tensor:
        """
        State used to score event i: h_{i-1}, with h_0 = 0 for the first event.

        A constant-history model returns zeros everywhere.
        """
        zeros = T.Tensor(np.zeros((batch.size, 1, self.config.hidden_dim)))
        if self.config.constant_history:
            return T.Tensor(np.zeros((batch.size, batch.max_length, self.config.hidden_dim)))
        states = self.encode(batch)
        return T.concat([zeros, states[:, :-1, :]], axis=1)

    def metadata(self) -> dict:
        model = self.config.model_dump(mode="json")
        # infinite horizons stay floats; the archive JSON spells them Infinity
        model["horizons"] = [float(eta) for eta in self.config.horizons]
        return {
            "model": model,
            "num_marks": self.num_marks,
            "mode": self.mode.value,
            "horizons": self.horizons,
            "seed": self.seed,
            "ablate_local": self.ablate_local,
            "beta": self.beta,
            "time_scale": self.time_scale,
        }

    def save(self, path: Union[str, Path], extra: Optional[dict] = None) -> Path:
        meta = self.metadata()
        if extra:
            meta.update(extra)
        return save_checkpoint(path, self.store, meta)

    @classmethod
    def from_checkpoint(cls, path: Union[str, Path]) -> "CtppModel":
        state, meta = load_checkpoint(path)
        try:
            model = cls(
                ModelConfig.model_validate(meta["model"]),
                num_marks=int(meta["num_marks"]),
                mode=Mode(meta["mode"]),
                horizons=[float(eta) for eta in meta["horizons"]],
                seed=int(meta.get("seed", 0)),
                ablate_local=bool(meta.get("ablate_local", False)),
                beta=float(meta.get("beta", 0.3)),
                time_scale=float(meta.get("time_scale", 1.0)),
            )
        except (KeyError, ValueError) as exc:
            raise UsageError(f"{path}: checkpoint metadata is incomplete ({exc})") from exc
        model.store.load_state_dict(state)
        return model
