from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ctpp.core.enums import KernelMode, Mode, TimeTransform


class ModelConfig(BaseModel):
    """Architecture hyperparameters."""

    model_config = ConfigDict(extra="forbid")

    embed_dim: int = Field(default=32, ge=1)
    hidden_dim: int = Field(default=32, ge=1)
    num_layers: int = Field(default=1, ge=0)
    # one entry per channel, shared by every local layer
    horizons: List[float] = Field(default=[3.0, 5.0], min_length=1)
    horizon_unit: Literal["delta", "absolute"] = "delta"
    omega_0: float = Field(default=1.0, gt=0.0)
    siren_hidden: List[int] = Field(default=[32, 32, 32], min_length=1)
    kernel_mode: KernelMode = KernelMode.FULL
    num_components: int = Field(default=16, ge=1)
    mark_bias: bool = False
    time_transform: TimeTransform = TimeTransform.RAW
    constant_history: bool = False
    ln_eps: float = Field(default=1e-5, gt=0.0)

    @field_validator("horizons")
    @classmethod
    def check_horizons(cls, horizons: List[float]) -> List[float]:
        if any(not eta > 0 for eta in horizons):
            raise ValueError("horizons must be positive (use .inf for an unbounded channel)")
        return horizons

    @field_validator("siren_hidden")
    @classmethod
    def check_widths(cls, widths: List[int]) -> List[int]:
        if any(w < 1 for w in widths):
            raise ValueError("SIREN widths must be positive")
        return widths


class TrainConfig(BaseModel):
    """Optimization and protocol settings."""

    model_config = ConfigDict(extra="forbid")

    mode: Mode = Mode.PROBABILISTIC
    beta: float = Field(default=0.3, ge=0.0)
    lr: float = Field(default=1e-3, gt=0.0)
    lr_decay: float = Field(default=0.5, gt=0.0, le=1.0)
    plateau_patience: int = Field(default=3, ge=1)
    early_stop_patience: int = Field(default=10, ge=1)
    max_epochs: int = Field(default=100, ge=1)
    batch_size: int = Field(default=32, ge=1)
    seed: int = 0
    grad_clip: float = Field(default=10.0, gt=0.0)
    score_first_event: bool = False
    ablate_local: bool = False
    threads: int = Field(default=1, ge=1)


class DataConfig(BaseModel):
    """Split files and preprocessing."""

    model_config = ConfigDict(extra="forbid")

    train: Path
    validation: Path
    test: Path
    num_marks: int = Field(ge=1)
    max_length: int = Field(default=256, ge=1)
    time_scale: float = Field(default=1.0, gt=0.0)
    # rescale by 1/delta of the training split; overrides time_scale
    auto_time_scale: bool = False


class RunConfig(BaseModel):
    """Everything one command run needs, as read from the YAML config file."""

    model_config = ConfigDict(extra="forbid")

    data: Optional[DataConfig] = None
    model: ModelConfig = ModelConfig()
    train: TrainConfig = TrainConfig()
    output_dir: Optional[Path] = None


class HistoryRow(BaseModel):
    epoch: int
    train_loss: float
    val_loss: float
    lr: float


class Metrics(BaseModel):
    """Per-event evaluation results over one split."""

    mode: Mode
    num_events: int
    time_scale: float = 1.0
    # probabilistic checkpoints
    nll: Optional[float] = None
    mark_nll: Optional[float] = None
    time_nll: Optional[float] = None
    nll_correction: Optional[float] = None
    time_nll_original_units: Optional[float] = None
    rmse_mixture_mean: Optional[float] = None
    # prediction checkpoints
    loss: Optional[float] = None
    accuracy: Optional[float] = None
    rmse: Optional[float] = None
    rmse_original_units: Optional[float] = None

    def to_report(self) -> str:
        """Flat ``key = value`` lines, skipping fields that do not apply to the mode."""
        lines = []
        for key, value in self.model_dump(mode="json", exclude_none=True).items():
            lines.append(f"{key} = {value}")
        return "\n".join(lines)
