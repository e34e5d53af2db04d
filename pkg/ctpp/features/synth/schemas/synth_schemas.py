from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ctpp.core.exceptions import StationarityError


def _check_probs(probs: List[float]) -> None:
    if not probs or min(probs) < 0:
        raise ValueError("mark_probs must be a non-empty vector of non-negative numbers")
    if abs(sum(probs) - 1.0) > 1e-12:
        raise ValueError(f"mark_probs must sum to 1, got {sum(probs)!r}")


class PoissonSpec(BaseModel):
    """Homogeneous Poisson process with i.i.d. categorical marks."""

    model_config = ConfigDict(extra="forbid")

    rate: float = Field(gt=0.0)
    mark_probs: List[float] = [1.0]
    horizon: Optional[float] = Field(default=None, gt=0.0)
    count: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def check(self) -> "PoissonSpec":
        _check_probs(self.mark_probs)
        if (self.horizon is None) == (self.count is None):
            raise ValueError("give exactly one of horizon or count")
        return self


class HawkesSpec(BaseModel):
    """Univariate Hawkes process with exponential excitation alpha * exp(-decay * tau)."""

    model_config = ConfigDict(extra="forbid")

    mu: float = Field(gt=0.0)
    alpha: float = Field(ge=0.0)
    decay: float = Field(gt=0.0)
    horizon: float = Field(gt=0.0)
    mark_probs: List[float] = [1.0]

    @model_validator(mode="after")
    def check(self) -> "HawkesSpec":
        _check_probs(self.mark_probs)
        return self

    @property
    def branching_ratio(self) -> float:
        return self.alpha / self.decay

    @property
    def stationary_rate(self) -> float:
        return self.mu / (1.0 - self.branching_ratio)

    def check_stationary(self) -> None:
        if self.branching_ratio >= 1.0:
            raise StationarityError(
                f"alpha/decay = {self.branching_ratio:g} must be below 1 for a stationary process"
            )


class RenewalSpec(BaseModel):
    """Renewal process with i.i.d. LogNormal(log_mean, log_std) intervals."""

    model_config = ConfigDict(extra="forbid")

    log_mean: float = 0.0
    log_std: float = Field(gt=0.0)
    count: int = Field(ge=1)
    mark_probs: List[float] = [1.0]

    @model_validator(mode="after")
    def check(self) -> "RenewalSpec":
        _check_probs(self.mark_probs)
        return self


class LocalMajoritySpec(BaseModel):
    """
    Poisson timing where each next mark is the majority mark among the
    events at most ``window`` time units before the current one.
    """

    model_config = ConfigDict(extra="forbid")

    rate: float = Field(default=1.0, gt=0.0)
    num_marks: int = Field(default=3, ge=2)
    window: float = Field(default=5.0, gt=0.0)
    count: int = Field(default=64, ge=1)
    noise: float = Field(default=0.1, ge=0.0, le=1.0)
