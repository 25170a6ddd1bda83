from __future__ import annotations

import math
from typing import List

from app.core.errors import ProtocolError, UnsupportedConfigurationError
from app.privacy.mechanisms import MechanismKind, Release
from app.varest.bayes import PriorKind, bayesian_improve


class SchVar2State:
    """
    Querier-side variance estimate for peer b rebuilt from consecutive PM1
    mean releases. t_i r_i - t_{i-1} r_{i-1} is the data sum over the gap
    plus the one fresh subsum noise, so scaling by 1/sqrt(gap) gives
    Y_i + Z~_i.

    The first release only anchors the reconstruction unless
    include_first_segment is set.
    """

    def __init__(
        self,
        sigma_dp_sq: float,
        include_first_segment: bool = False,
        bayesian: bool = False,
        prior: PriorKind = PriorKind.default,
    ):
        self.sigma_dp_sq = float(sigma_dp_sq)
        self.include_first_segment = include_first_segment
        self.bayesian = bayesian
        self.prior = prior

        self.prev_time = 0
        self.prev_scaled = 0.0
        self._anchored = include_first_segment
        self.increments: List[float] = []
        self.gaps: List[int] = []

        # welford over the scaled increments
        self.k = 0
        self._mean = 0.0
        self._m2 = 0.0
        self._sum_inv_gap = 0.0

        self.v_prime = math.inf
        self.raw = math.inf
        self.value = math.inf

    @property
    def K(self) -> float:
        return self._sum_inv_gap / self.k if self.k else math.inf

    def update(self, r: Release, kind: MechanismKind = MechanismKind.pm1) -> float:
        if kind != MechanismKind.pm1:
            raise UnsupportedConfigurationError("release-based variance reconstruction needs PM1 channels")
        if r.time <= self.prev_time:
            raise ProtocolError(f"release at t={r.time} does not follow t={self.prev_time}")

        scaled = r.time * r.noisy_mean
        if not self._anchored:
            self._anchored = True
            self.prev_time, self.prev_scaled = r.time, scaled
            return self.value

        gap = r.time - self.prev_time
        inc = scaled - self.prev_scaled
        y = inc / math.sqrt(gap)
        self.increments.append(inc)
        self.gaps.append(gap)
        self.prev_time, self.prev_scaled = r.time, scaled

        self.k += 1
        d = y - self._mean
        self._mean += d / self.k
        self._m2 += d * (y - self._mean)
        self._sum_inv_gap += 1.0 / gap

        self._refresh()
        return self.value

    def _refresh(self) -> None:
        if self.k < 2:
            return
        self.v_prime = self._m2 / (self.k - 1)
        self.raw = self.v_prime - self.sigma_dp_sq * self.K
        if self.raw >= 0:
            self.value = self.raw
        elif self.bayesian:
            self.value = bayesian_improve(self.raw, self.v_prime, self.k, self.K, self.sigma_dp_sq, self.prior)
        else:
            self.value = math.inf


def schvar2_update(state: SchVar2State, new_release: Release, kind: MechanismKind = MechanismKind.pm1) -> float:
    return state.update(new_release, kind)
