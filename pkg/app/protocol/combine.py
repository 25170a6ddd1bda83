from __future__ import annotations

from typing import Sequence, Tuple

import numpy as np


def min_variance_weights(variances: Sequence[float]) -> Tuple[np.ndarray, float]:
    """
    alpha_i = (1/var_i) / sum_j (1/var_j) and the combined variance
    1 / sum_j (1/var_j). +inf entries get weight 0; exact (zero-variance)
    entries share all the weight.
    """
    v = np.asarray(variances, dtype=float)
    alphas = np.zeros(v.shape)
    exact = v == 0.0
    if exact.any():
        alphas[exact] = 1.0 / exact.sum()
        return alphas, 0.0
    finite = np.isfinite(v)
    if not finite.any():
        return alphas, float("inf")
    inv = np.zeros(v.shape)
    inv[finite] = 1.0 / v[finite]
    total = inv.sum()
    return inv / total, 1.0 / total


def combine(values: Sequence[float], variances: Sequence[float]) -> Tuple[float, float, np.ndarray]:
    """Index 0 is the agent's own mean; it takes all weight when nothing is finite."""
    alphas, var = min_variance_weights(variances)
    if alphas.sum() == 0.0:
        alphas[0] = 1.0
    return float(np.dot(alphas, np.asarray(values, dtype=float))), var, alphas


def combine_estimate(state) -> float:
    """mu_a^(t) over own mean and accepted peers; updates state in place."""
    peers = state.accepted_peers()
    values = np.concatenate(([state.mean], state.T[peers]))
    variances = np.concatenate(([state.own_variance()], state.peer_variances()[peers]))
    mu, var, alphas = combine(values, variances)
    state.estimate = mu
    state.estimate_variance = var
    state.alphas = dict(zip([state.id, *peers.tolist()], alphas.tolist()))
    return mu
