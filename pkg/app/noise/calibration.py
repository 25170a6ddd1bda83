# app/noise/calibration.py
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from app.core.errors import ParameterError
from app.models.privacy import NoiseKind, PrivacyParams


@dataclass(frozen=True)
class NoiseDraw:
    value: float
    variance: float


def sigma_dp_squared(p: PrivacyParams) -> float:
    """
    Per-subsum noise variance for mean releases.
    Gaussian: 8 L^2 ln(1.25/delta) / eps^2, Laplace: 8 L^2 / eps^2.
    """
    p.validate_params()
    base = 8.0 * p.half_range ** 2 / p.epsilon ** 2
    if p.noise_kind == NoiseKind.laplace:
        return base
    return base * math.log(1.25 / p.delta)


def sigma2_dp_squared(p: PrivacyParams) -> float:
    """
    Per-subsum noise variance for squared-value releases.
    Gaussian: 32 L^4 ln(1.25/delta) / eps^2, Laplace: 32 L^4 / eps^2.
    """
    p.validate_params()
    base = 32.0 * p.half_range ** 4 / p.epsilon ** 2
    if p.noise_kind == NoiseKind.laplace:
        return base
    return base * math.log(1.25 / p.delta)


def draw(variance: float, kind: NoiseKind, rng: np.random.Generator) -> float:
    # hot path used by release channels; variance already checked by the caller
    if variance == 0.0:
        return 0.0
    if kind == NoiseKind.laplace:
        return float(rng.laplace(0.0, math.sqrt(variance / 2.0)))
    return float(rng.normal(0.0, math.sqrt(variance)))


def sample_noise(variance: float, kind: NoiseKind, rng: np.random.Generator) -> NoiseDraw:
    if not math.isfinite(variance) or variance < 0:
        raise ParameterError(f"noise variance must be finite and >= 0, got {variance}")
    return NoiseDraw(value=draw(variance, kind, rng), variance=float(variance))


def sample_noise_array(
    variance: float, kind: NoiseKind, rng: np.random.Generator, size: int
) -> np.ndarray:
    if not math.isfinite(variance) or variance < 0:
        raise ParameterError(f"noise variance must be finite and >= 0, got {variance}")
    if variance == 0.0:
        return np.zeros(size)
    if kind == NoiseKind.laplace:
        return rng.laplace(0.0, math.sqrt(variance / 2.0), size=size)
    return rng.normal(0.0, math.sqrt(variance), size=size)
