from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Tuple

from app.core.errors import ParameterError
from app.models.privacy import PrivacyParams
from app.privacy.mechanisms import MechanismKind


def composition_levels(kappa: int) -> int:
    """floor(log2 kappa) + 1 for kappa >= 1."""
    return int(kappa).bit_length()


def privacy_budget(kind: MechanismKind, kappa: int, p: PrivacyParams) -> Tuple[float, float]:
    if kappa < 1:
        raise ParameterError(f"privacy_budget needs kappa >= 1, got {kappa}")
    if kind == MechanismKind.pm1:
        return (p.epsilon, p.effective_delta)
    m = composition_levels(kappa)
    return (m * p.epsilon, m * p.effective_delta)


def scale_budget_for_pm2(p: PrivacyParams, t_max: int) -> PrivacyParams:
    if t_max < 1:
        raise ParameterError(f"t_max must be >= 1, got {t_max}")
    m = composition_levels(t_max)
    if m == 1:
        return p
    return p.with_budget(p.epsilon / m, p.delta / m)


def split_budget(p: PrivacyParams, ratio: float) -> Tuple[PrivacyParams, PrivacyParams]:
    """(mean-channel params, variance-channel params) sharing one (eps, delta)."""
    if not (0.0 < ratio < 1.0):
        raise ParameterError(f"budget split ratio must lie in (0, 1), got {ratio}")
    return (
        p.with_budget(p.epsilon * ratio, p.delta * ratio),
        p.with_budget(p.epsilon * (1.0 - ratio), p.delta * (1.0 - ratio)),
    )


@dataclass(frozen=True)
class ChannelBudget:
    source: int
    target: int
    kappa: int
    epsilon: float
    delta: float
    variance_epsilon: float = 0.0
    variance_delta: float = 0.0

    @property
    def total_epsilon(self) -> float:
        return self.epsilon + self.variance_epsilon

    @property
    def total_delta(self) -> float:
        return self.delta + self.variance_delta

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["total_epsilon"] = self.total_epsilon
        d["total_delta"] = self.total_delta
        return d


def channel_budget(
    source: int,
    target: int,
    kind: MechanismKind,
    kappa: int,
    mean_params: PrivacyParams,
    variance_params: Optional[PrivacyParams] = None,
) -> ChannelBudget:
    eps, delta = privacy_budget(kind, kappa, mean_params)
    v_eps = v_delta = 0.0
    if variance_params is not None:
        # W noises follow the mean channel's subsum structure
        v_eps, v_delta = privacy_budget(kind, kappa, variance_params)
    return ChannelBudget(source, target, kappa, eps, delta, v_eps, v_delta)
