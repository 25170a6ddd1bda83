from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from app.core.errors import ProtocolError
from app.models.privacy import NoiseKind
from app.noise.calibration import draw
from app.privacy.mechanisms import Subsum


@dataclass(frozen=True)
class SubsumMoments:
    start: int
    end: int
    s: float     # sum of x over the interval
    q: float     # sum of x^2 over the interval
    z: float     # mean-channel noise of the interval
    w: float     # variance-channel noise, drawn once
    vdd: float   # local noisy term handed to the assembly

    @property
    def length(self) -> int:
        return self.end - self.start + 1


class SchVar1State:
    """
    Responder-side private sample variance for one channel b->a.

    Mirrors the paired mean channel's subsums. Each subsum carries its own
    W noise of variance sigma2_dp_sq, drawn when the subsum is formed and
    reused for as long as the subsum lives.
    """

    def __init__(self, sigma2_dp_sq: float, noise_kind: NoiseKind = NoiseKind.gaussian):
        self.sigma2_dp_sq = float(sigma2_dp_sq)
        self.noise_kind = noise_kind
        self.entries: List[SubsumMoments] = []
        self._prefix: Dict[int, Tuple[float, float]] = {0: (0.0, 0.0)}
        self._sum_vdd = 0.0
        self._sum_inv_len = 0.0
        self.time = 0
        self.raw = math.inf
        self.value = math.inf

    def _retotal(self) -> None:
        self._sum_vdd = sum(e.vdd for e in self.entries)
        self._sum_inv_len = sum(1.0 / e.length for e in self.entries)

    def _form(self, sub: Subsum, t: int, prefix_sum: float, prefix_sq: float, rng: np.random.Generator) -> SubsumMoments:
        if sub.end != t:
            raise ProtocolError(f"new subsum [{sub.start}:{sub.end}] does not end at release time {t}")
        base = self._prefix.get(sub.start - 1)
        if base is None:
            raise ProtocolError(f"subsum [{sub.start}:{sub.end}] starts after an unknown boundary")
        s = prefix_sum - base[0]
        q = prefix_sq - base[1]
        n = sub.length
        w = draw(self.sigma2_dp_sq, self.noise_kind, rng)
        v_tilde = q - s * s / n + (n - 1) / n * w
        vdd = v_tilde + (s + sub.noise) ** 2 / n
        return SubsumMoments(start=sub.start, end=sub.end, s=s, q=q, z=sub.noise, w=w, vdd=vdd)

    def update(
        self,
        subsums: Sequence[Subsum],
        t: int,
        prefix_sum: float,
        prefix_sq: float,
        noisy_mean: float,
        sigma_dp_sq: float,
        rng: np.random.Generator,
    ) -> float:
        if t <= self.time:
            raise ProtocolError(f"variance release at t={t} does not follow t={self.time}")
        self._prefix[t] = (prefix_sum, prefix_sq)

        popped = False
        while self.entries:
            i = len(self.entries) - 1
            e = self.entries[i]
            if i < len(subsums) and subsums[i].start == e.start and subsums[i].end == e.end:
                break
            self.entries.pop()
            popped = True
        if popped:
            self._retotal()

        for sub in subsums[len(self.entries):]:
            e = self._form(sub, t, prefix_sum, prefix_sq, rng)
            self.entries.append(e)
            self._sum_vdd += e.vdd
            self._sum_inv_len += 1.0 / e.length

        if len(self._prefix) > 2 * (len(self.entries) + 1):
            keep = {e.start - 1 for e in self.entries} | {t}
            self._prefix = {k: v for k, v in self._prefix.items() if k in keep}

        self.time = t
        self.raw = assemble_variance(
            self._sum_vdd, self._sum_inv_len, len(self.entries), t, noisy_mean, sigma_dp_sq
        )
        self.value = self.raw if self.raw >= 0 else math.inf
        return self.value


def assemble_variance(
    sum_vdd: float, sum_inv_len: float, k: int, t: int, noisy_mean: float, sigma_dp_sq: float
) -> float:
    if t < 2:
        return math.inf
    return (
        sum_vdd / (t - 1)
        - t / (t - 1) * noisy_mean ** 2
        - sigma_dp_sq / (t - 1) * (sum_inv_len - k / t)
    )


def schvar1_release(
    state: SchVar1State,
    subsums: Sequence[Subsum],
    t: int,
    prefix_sum: float,
    prefix_sq: float,
    noisy_mean: float,
    sigma_dp_sq: float,
    rng: np.random.Generator,
) -> float:
    return state.update(subsums, t, prefix_sum, prefix_sq, noisy_mean, sigma_dp_sq, rng)
