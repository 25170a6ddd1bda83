from __future__ import annotations

from typing import Dict, Sequence, Tuple

import numpy as np

from app.privacy.mechanisms import MechanismKind, hamming_weight

Interval = Tuple[int, int]


def _as_arrays(times: Sequence[int], weights: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    t = np.asarray(times, dtype=float)
    w = np.asarray(weights, dtype=float)
    if t.shape != w.shape:
        raise ValueError(f"times and weights differ in length: {t.shape} vs {w.shape}")
    return t, w


def suffix_coefficients(times: Sequence[int], weights: Sequence[float]) -> np.ndarray:
    """c_i = sum_{j >= i} w_j / t_j."""
    t, w = _as_arrays(times, weights)
    return np.cumsum((w / t)[::-1])[::-1]


# -------- data term --------
def data_variance_factor(times: Sequence[int], weights: Sequence[float]) -> float:
    """sum_i (t_i - t_{i-1}) c_i^2 with t_0 = 0; the data term at unit variance."""
    if len(times) == 0:
        return float("inf")
    t, _ = _as_arrays(times, weights)
    c = suffix_coefficients(times, weights)
    gaps = np.diff(t, prepend=0.0)
    return float(np.dot(gaps, c * c))


def data_variance_term(sigma_b_sq: float, times: Sequence[int], weights: Sequence[float]) -> float:
    return sigma_b_sq * data_variance_factor(times, weights)


# -------- noise term --------
def pm1_noise_factor(times: Sequence[int], weights: Sequence[float]) -> float:
    c = suffix_coefficients(times, weights)
    return float(np.dot(c, c))


def pm2_noise_factor(times: Sequence[int], weights: Sequence[float]) -> float:
    """
    Squared subsum coefficients under the binary mechanism. The live subsum
    of size 2^b created at release q*2^b enters every release j with
    j >> b == q and bit b of j set, so coefficients group by (b, j >> b).
    """
    t, w = _as_arrays(times, weights)
    kappa = len(t)
    if kappa == 0:
        return 0.0
    c = w / t
    j = np.arange(1, kappa + 1)
    total = 0.0
    for b in range(kappa.bit_length()):
        mask = ((j >> b) & 1) == 1
        if not mask.any():
            continue
        groups = np.bincount(j[mask] >> b, weights=c[mask])
        total += float(np.dot(groups, groups))
    return total


def noise_variance_factor(kind: MechanismKind, times: Sequence[int], weights: Sequence[float]) -> float:
    if kind == MechanismKind.pm1:
        return pm1_noise_factor(times, weights)
    return pm2_noise_factor(times, weights)


def noise_variance_term(
    kind: MechanismKind, times: Sequence[int], weights: Sequence[float], sigma_dp_sq: float
) -> float:
    if sigma_dp_sq == 0.0:
        return 0.0
    return sigma_dp_sq * noise_variance_factor(kind, times, weights)


def total_variance(
    kind: MechanismKind,
    times: Sequence[int],
    weights: Sequence[float],
    sigma_b_sq: float,
    sigma_dp_sq: float,
) -> float:
    if len(times) == 0:
        return float("inf")
    return data_variance_term(sigma_b_sq, times, weights) + noise_variance_term(kind, times, weights, sigma_dp_sq)


# -------- brute force --------
def enumerate_subsum_coefficients(
    kind: MechanismKind, times: Sequence[int], weights: Sequence[float]
) -> Dict[Interval, float]:
    """
    Replay the mechanism's subsum bookkeeping on index intervals and collect
    each formed subsum's coefficient in sum_j w_j Z^(t_j).
    """
    coef: Dict[Interval, float] = {}
    live: list[Tuple[int, int, int]] = []  # (start, end, count)
    prev = 0
    for tj, wj in zip(times, weights):
        tj = int(tj)
        if kind == MechanismKind.pm1:
            live.append((prev + 1, tj, 1))
        else:
            count, start = 1, prev + 1
            while live and live[-1][2] == count:
                start = live.pop()[0]
                count *= 2
            live.append((start, tj, count))
        for start, end, _ in live:
            key = (start, end)
            coef[key] = coef.get(key, 0.0) + float(wj) / tj
        prev = tj
    return coef


def brute_force_noise_variance(
    kind: MechanismKind, times: Sequence[int], weights: Sequence[float], sigma_dp_sq: float
) -> float:
    coef = enumerate_subsum_coefficients(kind, times, weights)
    return sigma_dp_sq * float(sum(v * v for v in coef.values()))


# -------- closed forms --------
def nonmom_variance(
    kind: MechanismKind, kappa: int, t_last: int, sigma_b_sq: float, sigma_dp_sq: float
) -> float:
    k = kappa if kind == MechanismKind.pm1 else hamming_weight(kappa)
    return sigma_b_sq / t_last + k * sigma_dp_sq / (t_last * t_last)


def mom_data_variance(sigma_b_sq: float, times: Sequence[int]) -> float:
    t = np.asarray(times, dtype=float)
    kappa = len(t)
    i = np.arange(1, kappa + 1)
    return sigma_b_sq / kappa ** 2 * float(np.sum((2 * i - 1) / t))


def mom_pm1_noise_variance(sigma_dp_sq: float, times: Sequence[int]) -> float:
    t = np.asarray(times, dtype=float)
    kappa = len(t)
    s = np.cumsum((1.0 / t)[::-1])[::-1]
    return sigma_dp_sq / kappa ** 2 * float(np.dot(s, s))


def mom_pm1_bound(sigma_b_sq: float, sigma_dp_sq: float, kappa: int) -> float:
    """Upper bound on MoM Var(T) under PM1 when t_i >= i."""
    return 2.0 * (sigma_b_sq + sigma_dp_sq) / kappa
