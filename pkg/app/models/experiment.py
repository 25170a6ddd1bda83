from __future__ import annotations

import copy
import math
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.errors import UnsupportedConfigurationError
from app.models.privacy import DataDistribution, DistributionKind, NoiseKind, PrivacyParams
from app.privacy.budget import scale_budget_for_pm2, split_budget
from app.privacy.mechanisms import MechanismKind
from app.stats.weights import WeightScheme
from app.varest.bayes import PriorKind


class ScheduleKind(str, Enum):
    rr = "rr"
    rrr = "rrr"  # restricted round robin


class VarianceMode(str, Enum):
    known = "known"
    schvar1 = "schvar1"
    schvar2 = "schvar2"
    schvar2_bayes = "schvar2_bayes"


class DecisionMode(str, Enum):
    known_variance = "known_variance"
    unknown_variance = "unknown_variance"


class ClassEstimator(str, Enum):
    test = "test"
    oracle = "oracle"  # C_a^(t) forced to the true class
    local = "local"    # no collaboration


class AssignmentKind(str, Enum):
    uniform_random = "uniform_random"
    explicit = "explicit"


class ThetaKind(str, Enum):
    log_decay = "log_decay"  # scale / ln(t + 1)
    constant = "constant"


class CurveKind(str, Enum):
    simulated = "simulated"
    local = "local"
    ideal = "ideal"
    oracle_rr = "oracle_rr"
    oracle_rrr = "oracle_rrr"


class ThetaSchedule(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: ThetaKind = ThetaKind.log_decay
    scale: float = Field(default=0.05, gt=0)
    value: Optional[float] = Field(default=None, gt=0, le=1)

    @model_validator(mode="after")
    def _check(self) -> "ThetaSchedule":
        if self.kind == ThetaKind.constant and self.value is None:
            raise ValueError("constant theta schedule needs `value`")
        return self

    def at(self, t: int) -> float:
        if self.kind == ThetaKind.constant:
            return float(self.value)
        return min(1.0, self.scale / math.log(t + 1.0))


class DecisionConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    # None -> follows variance_mode
    mode: Optional[DecisionMode] = None
    theta: ThetaSchedule = Field(default_factory=ThetaSchedule)


class PrivacySettings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    epsilon: float = Field(default=1.0, gt=0)
    delta: float = Field(default=1e-6, ge=0)
    noise_kind: NoiseKind = NoiseKind.gaussian
    # default: largest class half-range
    half_range: Optional[float] = Field(default=None, gt=0)


class SimConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    agents: int = 15
    class_means: List[float] = Field(default_factory=lambda: [0.2, 0.4, 0.8])
    std: float = Field(default=0.5, ge=0)
    class_stds: Optional[List[float]] = None
    distribution: DistributionKind = DistributionKind.uniform
    assignment: AssignmentKind = AssignmentKind.uniform_random
    classes: Optional[List[int]] = None

    t_max: int = Field(default=1000, ge=0)
    mechanism: MechanismKind = MechanismKind.pm1
    weights: WeightScheme = WeightScheme.non_mom
    schedule: ScheduleKind = ScheduleKind.rr
    privacy: Optional[PrivacySettings] = Field(default_factory=PrivacySettings)
    scale_pm2_budget: bool = True

    decision: DecisionConfig = Field(default_factory=DecisionConfig)
    variance_mode: VarianceMode = VarianceMode.known
    schvar1_split: float = Field(default=0.5, gt=0, lt=1)
    prior: PriorKind = PriorKind.default
    include_first_segment: bool = False
    class_estimator: ClassEstimator = ClassEstimator.test
    history_cap: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "SimConfig":
        if self.agents < 2:
            raise ValueError(f"need at least 2 agents, got {self.agents}")
        if not self.class_means:
            raise ValueError("class_means must not be empty")
        if self.class_stds is not None:
            if len(self.class_stds) != len(self.class_means):
                raise ValueError("class_stds must match class_means in length")
            if any(s < 0 for s in self.class_stds):
                raise ValueError("class_stds must be >= 0")
        if self.assignment == AssignmentKind.explicit:
            if self.classes is None or len(self.classes) != self.agents:
                raise ValueError("explicit assignment needs one class index per agent")
            if any(c < 0 or c >= len(self.class_means) for c in self.classes):
                raise ValueError("class index out of range")
        elif self.classes is not None:
            raise ValueError("`classes` is only allowed with explicit assignment")
        mode = self.decision.mode
        if mode == DecisionMode.known_variance and self.variance_mode != VarianceMode.known:
            raise ValueError("known-variance decisions cannot run with estimated variances")
        if mode == DecisionMode.unknown_variance and self.variance_mode == VarianceMode.known:
            raise ValueError("unknown-variance decisions need a variance estimation mode")
        return self

    # -------- derived --------
    @property
    def num_classes(self) -> int:
        return len(self.class_means)

    @property
    def decision_mode(self) -> DecisionMode:
        if self.decision.mode is not None:
            return self.decision.mode
        if self.variance_mode == VarianceMode.known:
            return DecisionMode.known_variance
        return DecisionMode.unknown_variance

    def class_std(self, c: int) -> float:
        return self.class_stds[c] if self.class_stds is not None else self.std

    @property
    def homogeneous_std(self) -> bool:
        return self.class_stds is None or len(set(self.class_stds)) == 1

    def class_distribution(self, c: int) -> DataDistribution:
        return DataDistribution(kind=self.distribution, mean=self.class_means[c], std=self.class_std(c))

    def half_range(self) -> float:
        if self.privacy is not None and self.privacy.half_range is not None:
            return self.privacy.half_range
        return max(self.class_distribution(c).half_range for c in range(self.num_classes))

    def check_supported(self) -> None:
        if self.variance_mode in (VarianceMode.schvar2, VarianceMode.schvar2_bayes) and self.mechanism != MechanismKind.pm1:
            raise UnsupportedConfigurationError("release-based variance reconstruction needs the pm1 mechanism")
        if self.variance_mode == VarianceMode.schvar2_bayes and self.privacy is None:
            raise UnsupportedConfigurationError("bayesian variance improvement needs privacy noise")
        self.privacy_params()

    def _base_params(self) -> Optional[PrivacyParams]:
        if self.privacy is None:
            return None
        return PrivacyParams(
            epsilon=self.privacy.epsilon,
            delta=self.privacy.delta,
            half_range=self.half_range(),
            noise_kind=self.privacy.noise_kind,
        )

    def privacy_params(self) -> Tuple[Optional[PrivacyParams], Optional[PrivacyParams]]:
        """(mean-channel params, variance-channel params), budgets already split/scaled."""
        p = self._base_params()
        if p is None:
            return None, None
        if self.mechanism == MechanismKind.pm2 and self.scale_pm2_budget and self.t_max >= 1:
            p = scale_budget_for_pm2(p, self.t_max)
        var_p: Optional[PrivacyParams] = None
        if self.variance_mode == VarianceMode.schvar1:
            p, var_p = split_budget(p, self.schvar1_split)
            var_p.validate_params()
        p.validate_params()
        return p, var_p


class SeedSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    base: int = 1
    count: int = Field(default=20, ge=1)


class ExperimentFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = None
    output: Optional[str] = None
    seeds: SeedSpec = Field(default_factory=SeedSpec)
    seed_list: Optional[List[int]] = None
    curves: List[CurveKind] = Field(default_factory=lambda: [CurveKind.simulated, CurveKind.local, CurveKind.ideal])
    stride: int = Field(default=10, ge=1)
    oracle_half_width: int = Field(default=15, ge=0)
    oracle_combo_budget: int = Field(default=10_000, ge=1)
    simulation: SimConfig = Field(default_factory=SimConfig)

    @model_validator(mode="before")
    @classmethod
    def _apply_preset(cls, data: Any) -> Any:
        if not isinstance(data, dict) or not data.get("preset"):
            return data
        name = data["preset"]
        if name not in PRESETS:
            raise ValueError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
        merged = _deep_merge(PRESETS[name], {k: v for k, v in data.items() if k != "preset"})
        merged["preset"] = name
        return merged

    def seed_values(self) -> List[int]:
        if self.seed_list:
            return list(self.seed_list)
        return [self.seeds.base + i for i in range(self.seeds.count)]


def _deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for k, v in (override or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


_FIG1: Dict[str, Any] = {
    "seeds": {"base": 1, "count": 20},
    "curves": ["simulated", "local", "ideal", "oracle_rr"],
    "simulation": {
        "agents": 200,
        "class_means": [0.2, 0.4, 0.8],
        "std": 0.5,
        "t_max": 30000,
        "mechanism": "pm1",
        "weights": "non_mom",
        "schedule": "rr",
        "privacy": {"epsilon": 1.0, "delta": 1e-6, "noise_kind": "gaussian"},
        "variance_mode": "known",
    },
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "fig1": _FIG1,
    "fig2": _deep_merge(_FIG1, {"curves": ["simulated", "local", "ideal"], "simulation": {"variance_mode": "schvar2"}}),
    "fig3": _deep_merge(_FIG1, {"simulation": {"privacy": {"noise_kind": "laplace"}}}),
}
