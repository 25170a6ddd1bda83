from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import List

import numpy as np

from app.core.errors import ParameterError, ProtocolError
from app.models.privacy import NoiseKind
from app.noise.calibration import draw


class MechanismKind(str, Enum):
    pm1 = "pm1"  # one fresh subsum per query
    pm2 = "pm2"  # binary representation of the query counter


@dataclass(frozen=True)
class Subsum:
    start: int  # first stream index covered
    end: int    # last stream index covered (a release time)
    count: int  # releases merged into it
    noise: float

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class Release:
    noisy_mean: float
    time: int
    kappa: int
    noise_variance: float
    noise_sum: float  # t * Z, the sum of live subsum noises


def hamming_weight(n: int) -> int:
    if n < 0:
        raise ParameterError(f"hamming_weight of negative {n}")
    return int(n).bit_count()


class ReleaseChannel:
    """
    Private release state for one ordered pair b->a.
    The owner supplies prefix sums of its own stream; the channel only
    holds noise for the subsums it has formed.
    """

    kind: MechanismKind

    def __init__(self, sigma_dp_sq: float, noise_kind: NoiseKind = NoiseKind.gaussian):
        if not sigma_dp_sq >= 0:
            raise ParameterError(f"sigma_dp_sq must be >= 0, got {sigma_dp_sq}")
        self.sigma_dp_sq = float(sigma_dp_sq)
        self.noise_kind = noise_kind
        self.kappa = 0
        self.last_time = 0

    # -------- subclass hooks --------
    def _advance(self, t: int, rng: np.random.Generator) -> float:
        raise NotImplementedError

    def _noise_multiplier(self) -> int:
        raise NotImplementedError

    @property
    def subsums(self) -> List[Subsum]:
        raise NotImplementedError

    # -------- public --------
    def release_mean(self, prefix_sum: float, t: int, rng: np.random.Generator) -> Release:
        if t <= self.last_time:
            raise ProtocolError(f"release time {t} not after previous release {self.last_time}")
        noise_sum = self._advance(t, rng)
        self.kappa += 1
        self.last_time = t
        k = self._noise_multiplier()
        return Release(
            noisy_mean=(prefix_sum + noise_sum) / t,
            time=t,
            kappa=self.kappa,
            noise_variance=k * self.sigma_dp_sq / (t * t),
            noise_sum=noise_sum,
        )


class Pm1Channel(ReleaseChannel):
    kind = MechanismKind.pm1

    def __init__(
        self,
        sigma_dp_sq: float,
        noise_kind: NoiseKind = NoiseKind.gaussian,
        track_subsums: bool = False,
    ):
        super().__init__(sigma_dp_sq, noise_kind)
        self.cumulative_noise = 0.0
        self.track_subsums = track_subsums
        self._subsums: List[Subsum] = []

    def _advance(self, t: int, rng: np.random.Generator) -> float:
        z = draw(self.sigma_dp_sq, self.noise_kind, rng)
        self.cumulative_noise += z
        if self.track_subsums:
            self._subsums.append(Subsum(start=self.last_time + 1, end=t, count=1, noise=z))
        return self.cumulative_noise

    def _noise_multiplier(self) -> int:
        return self.kappa

    @property
    def subsums(self) -> List[Subsum]:
        if not self.track_subsums:
            raise ProtocolError("PM1 channel was opened without subsum tracking")
        # live list, callers must not mutate
        return self._subsums


class Pm2Channel(ReleaseChannel):
    kind = MechanismKind.pm2

    def __init__(self, sigma_dp_sq: float, noise_kind: NoiseKind = NoiseKind.gaussian):
        super().__init__(sigma_dp_sq, noise_kind)
        self.stack: List[Subsum] = []

    def _advance(self, t: int, rng: np.random.Generator) -> float:
        # binary carry: equal-sized tops merge into one new interval with ONE fresh noise
        count = 1
        start = self.last_time + 1
        while self.stack and self.stack[-1].count == count:
            start = self.stack.pop().start
            count *= 2
        self.stack.append(Subsum(start=start, end=t, count=count, noise=draw(self.sigma_dp_sq, self.noise_kind, rng)))
        return float(sum(s.noise for s in self.stack))

    def _noise_multiplier(self) -> int:
        return len(self.stack)

    @property
    def subsums(self) -> List[Subsum]:
        return self.stack


def open_channel(
    kind: MechanismKind,
    sigma_dp_sq: float,
    noise_kind: NoiseKind = NoiseKind.gaussian,
    track_subsums: bool = False,
) -> ReleaseChannel:
    if kind == MechanismKind.pm1:
        return Pm1Channel(sigma_dp_sq, noise_kind, track_subsums=track_subsums)
    return Pm2Channel(sigma_dp_sq, noise_kind)


def release_mean(ch: ReleaseChannel, prefix_sum: float, t: int, rng: np.random.Generator) -> Release:
    return ch.release_mean(prefix_sum, t, rng)
