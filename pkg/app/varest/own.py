from __future__ import annotations

from typing import Iterable, Optional

import numpy as np


class OwnVarianceAccumulator:
    """
    Running count / sum / sum of squares of an agent's own stream.
    With `size` the sums are arrays, one slot per agent, all fed in lockstep.
    """

    def __init__(self, size: Optional[int] = None):
        self.count = 0
        if size is None:
            self.total: float | np.ndarray = 0.0
            self.total_sq: float | np.ndarray = 0.0
        else:
            self.total = np.zeros(size)
            self.total_sq = np.zeros(size)

    def push(self, x: float | np.ndarray) -> None:
        self.count += 1
        self.total = self.total + x
        self.total_sq = self.total_sq + x * x

    def extend(self, values: Iterable[float]) -> "OwnVarianceAccumulator":
        for x in values:
            self.push(x)
        return self

    @property
    def mean(self) -> float | np.ndarray:
        if self.count == 0:
            return self.total * 0.0
        return self.total / self.count

    def variance(self) -> float | np.ndarray:
        """(sum x^2 - t xbar^2) / (t - 1); +inf for t < 2."""
        t = self.count
        if t < 2:
            if isinstance(self.total, np.ndarray):
                return np.full(self.total.shape, np.inf)
            return float("inf")
        v = (self.total_sq - t * self.mean ** 2) / (t - 1)
        # rounding can push a constant stream slightly below zero
        if isinstance(v, np.ndarray):
            return np.maximum(v, 0.0)
        return max(float(v), 0.0)


def own_sample_variance(acc: OwnVarianceAccumulator) -> float | np.ndarray:
    return acc.variance()
