from __future__ import annotations

import math
from enum import Enum

from app.core.errors import ImpossibleStateError, ParameterError
from app.noise.special import gamma_ratio

NEGATIVE_SLACK = 1e-10


class PriorKind(str, Enum):
    default = "default"    # prior ~ 1 / (sigma^2 + K sigma_dp^2)^2
    jeffreys = "jeffreys"


def posterior_shape(kappa: int, prior: PriorKind = PriorKind.default) -> float:
    if prior == PriorKind.jeffreys:
        return (kappa + 1) / 2.0
    return (kappa + 2) / 2.0


def bayesian_improve(
    v_raw: float,
    v_prime: float,
    kappa: int,
    K: float,
    sigma_dp_sq: float,
    prior: PriorKind = PriorKind.default,
) -> float:
    """
    Posterior mean of sigma_b^2 under a truncated inverse-gamma posterior
    on u = sigma_b^2 + K sigma_dp^2 >= K sigma_dp^2. Non-negative raw
    estimates pass through unchanged.
    """
    if v_raw >= 0:
        return v_raw
    if sigma_dp_sq == 0:
        raise ImpossibleStateError(f"noiseless variance estimate is negative ({v_raw})")
    if kappa < 2:
        raise ParameterError(f"bayesian_improve needs kappa >= 2, got {kappa}")
    if not K > 0:
        raise ParameterError(f"K must be positive, got {K}")

    floor = K * sigma_dp_sq
    s = posterior_shape(kappa, prior)
    beta = (kappa - 1) * v_prime / 2.0
    if beta <= 0:
        # V' -> 0 limit of beta * gamma(s-1, x) / gamma(s, x)
        out = floor / (s - 1.0)
    else:
        out = beta * gamma_ratio(s, beta / floor) - floor

    if out < -NEGATIVE_SLACK or not math.isfinite(out):
        raise ImpossibleStateError(f"posterior mean came out as {out}")
    return max(out, 0.0)
