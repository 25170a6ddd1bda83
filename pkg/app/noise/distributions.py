from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from app.models.privacy import DataDistribution, DistributionKind


def sample_data(
    dist: DataDistribution, rng: np.random.Generator, size: Optional[int] = None
) -> np.ndarray | float:
    if dist.kind == DistributionKind.point_mass:
        return dist.mean if size is None else np.full(size, dist.mean)
    lo, hi = dist.support
    return rng.uniform(lo, hi, size=size)


class AgentSampler:
    """
    Draws one value per agent per step. Uniform agents share a single
    vectorized draw; point-mass agents are fixed.
    """

    def __init__(self, dists: Sequence[DataDistribution]):
        self.means = np.array([d.mean for d in dists], dtype=float)
        halves = np.array([d.half_range for d in dists], dtype=float)
        self.low = self.means - halves
        self.high = self.means + halves
        self.variances = np.array([d.variance for d in dists], dtype=float)

    def __len__(self) -> int:
        return len(self.means)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        # uniform(lo, lo) == lo, so point masses need no special casing
        return rng.uniform(self.low, self.high)
