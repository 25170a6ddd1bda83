from __future__ import annotations

from typing import Sequence

import numpy as np

from app.core.errors import ParameterError


def local_mse(sigmas: Sequence[float], t: int | np.ndarray) -> float | np.ndarray:
    """(1 / (M t)) sum_a sigma_a^2: every agent alone."""
    s = np.asarray(sigmas, dtype=float)
    if np.any(np.asarray(t) < 1):
        raise ParameterError("local_mse needs t >= 1")
    return float(np.sum(s * s)) / (len(s) * np.asarray(t, dtype=float))


def ideal_mse(sigmas: Sequence[float], class_sizes: Sequence[int], t: int | np.ndarray) -> float | np.ndarray:
    """(1 / (M t)) sum_a sigma_a^2 / |C_a|: all in-class data pooled."""
    s = np.asarray(sigmas, dtype=float)
    c = np.asarray(class_sizes, dtype=float)
    if s.shape != c.shape:
        raise ParameterError("sigmas and class_sizes differ in length")
    if np.any(c < 1):
        raise ParameterError("class sizes must be >= 1")
    if np.any(np.asarray(t) < 1):
        raise ParameterError("ideal_mse needs t >= 1")
    return float(np.sum(s * s / c)) / (len(s) * np.asarray(t, dtype=float))


def class_sizes(classes: Sequence[int]) -> np.ndarray:
    c = np.asarray(classes, dtype=int)
    counts = np.bincount(c)
    return counts[c]
