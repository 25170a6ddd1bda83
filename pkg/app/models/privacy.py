from __future__ import annotations

import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field

from app.core.errors import ParameterError


class NoiseKind(str, Enum):
    gaussian = "gaussian"
    laplace = "laplace"


class DistributionKind(str, Enum):
    uniform = "uniform"
    point_mass = "point_mass"  # degenerate, tests only


class PrivacyParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: float
    delta: float = 0.0
    half_range: float
    noise_kind: NoiseKind = NoiseKind.gaussian

    def validate_params(self) -> None:
        if not math.isfinite(self.half_range) or self.half_range <= 0:
            raise ParameterError(f"half_range must be positive and finite, got {self.half_range}")
        if not math.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.noise_kind == NoiseKind.gaussian:
            if self.epsilon > 1:
                raise ParameterError(f"gaussian mechanism needs epsilon <= 1, got {self.epsilon}")
            if not (0 < self.delta <= 1):
                raise ParameterError(f"gaussian mechanism needs 0 < delta <= 1, got {self.delta}")

    @property
    def effective_delta(self) -> float:
        # laplace ignores delta
        return 0.0 if self.noise_kind == NoiseKind.laplace else self.delta

    def with_budget(self, epsilon: float, delta: float) -> "PrivacyParams":
        return self.model_copy(update={"epsilon": epsilon, "delta": delta})


class DataDistribution(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: DistributionKind = DistributionKind.uniform
    mean: float
    std: float = Field(default=0.5, ge=0)

    @property
    def half_range(self) -> float:
        if self.kind == DistributionKind.uniform:
            return self.std * math.sqrt(3.0)
        return 0.0

    @property
    def variance(self) -> float:
        return self.std * self.std

    @property
    def support(self) -> tuple[float, float]:
        return (self.mean - self.half_range, self.mean + self.half_range)
