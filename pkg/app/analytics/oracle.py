from __future__ import annotations

import math
from itertools import combinations
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats

from app.core.errors import ConfigError
from app.models.experiment import SimConfig, VarianceMode
from app.noise.calibration import sigma_dp_squared
from app.privacy.mechanisms import MechanismKind
from app.protocol.schedule import rr_kappa
from app.stats.variance import nonmom_variance, total_variance
from app.stats.weights import WeightScheme, scheme_weights


class OracleCurveConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    agents: int = Field(ge=2)
    p: float = Field(gt=0, le=1)
    sigma: float = Field(gt=0)
    mechanism: MechanismKind = MechanismKind.pm1
    weights: WeightScheme = WeightScheme.non_mom
    sigma_dp_sq: float = Field(default=0.0, ge=0)
    half_width: int = Field(default=15, ge=0)
    combo_budget: int = Field(default=10_000, ge=1)
    sample_seed: int = 0

    @model_validator(mode="after")
    def _check(self) -> "OracleCurveConfig":
        lo, hi = n_bounds(self.agents, self.p, self.half_width)
        if not (1 <= lo <= hi <= self.agents):
            raise ValueError("truncated class-size range is empty")
        return self

    @classmethod
    def from_sim(cls, cfg: SimConfig, half_width: int = 15, combo_budget: int = 10_000) -> "OracleCurveConfig":
        if not cfg.homogeneous_std:
            raise ConfigError("oracle curves need a common data std across classes")
        if cfg.variance_mode != VarianceMode.known:
            raise ConfigError("oracle curves are defined for known variances only")
        mean_p, _ = cfg.privacy_params()
        return cls(
            agents=cfg.agents,
            p=1.0 / cfg.num_classes,
            sigma=cfg.class_std(0),
            mechanism=cfg.mechanism,
            weights=cfg.weights,
            sigma_dp_sq=sigma_dp_squared(mean_p) if mean_p is not None else 0.0,
            half_width=half_width,
            combo_budget=combo_budget,
        )


def n_bounds(agents: int, p: float, half_width: int) -> Tuple[int, int]:
    pm = p * agents
    return max(int(math.floor(pm - half_width)), 1), min(int(math.ceil(pm + half_width)), agents)


def class_size_weights(agents: int, p: float) -> np.ndarray:
    """P(|C_a| = n) for n = 1..M when each peer is in-class with probability p."""
    n = np.arange(1, agents + 1)
    return stats.binom.pmf(n - 1, agents - 1, p)


# -------- peer statistics --------
def peer_inverse_variance(cfg: OracleCurveConfig, times: List[int]) -> float:
    kappa = len(times)
    if kappa == 0:
        return 0.0
    s2 = cfg.sigma ** 2
    if cfg.weights == WeightScheme.non_mom:
        var = nonmom_variance(cfg.mechanism, kappa, times[-1], s2, cfg.sigma_dp_sq)
    else:
        var = total_variance(cfg.mechanism, times, scheme_weights(cfg.weights, kappa), s2, cfg.sigma_dp_sq)
    return 1.0 / var


def round_robin_times(position: int, ring: int, t: int) -> List[int]:
    """Query times of the peer at 1-based `position` among `ring` agents (self included)."""
    kappa = rr_kappa(position, ring, t)
    return [position + i * (ring - 1) for i in range(kappa)]


def rr_inverse_variances(cfg: OracleCurveConfig, t: int, ring: Optional[int] = None) -> np.ndarray:
    ring = cfg.agents if ring is None else ring
    return np.array([peer_inverse_variance(cfg, round_robin_times(l, ring, t)) for l in range(1, ring)])


# -------- averaging over peer tuples --------
class OracleEvaluator:
    """
    Evaluates the oracle MSE under RR on a t grid. For each class size n the
    average of 1/e_{n,t} over (n-1)-subsets of peers is exact when the
    number of subsets fits the combination budget; otherwise it uses prefixes
    of fixed-seed random permutations, which are uniform random subsets.
    """

    def __init__(self, cfg: OracleCurveConfig):
        self.cfg = cfg
        m = cfg.agents
        self.lo, self.hi = n_bounds(m, cfg.p, cfg.half_width)
        self.pmf = class_size_weights(m, cfg.p)
        self.exact: Dict[int, np.ndarray] = {}
        sampled = False
        for n in range(self.lo, self.hi + 1):
            if n == 1:
                continue
            if math.comb(m - 1, n - 1) <= cfg.combo_budget:
                self.exact[n] = np.array(list(combinations(range(m - 1), n - 1)), dtype=np.int64).reshape(-1, n - 1)
            else:
                sampled = True
        self.perms: Optional[np.ndarray] = None
        if sampled:
            rng = np.random.default_rng(cfg.sample_seed)
            keys = rng.random((cfg.combo_budget, m - 1))
            self.perms = np.argsort(keys, axis=1)

    def rr(self, t: int) -> float:
        base = t / self.cfg.sigma ** 2
        inv = rr_inverse_variances(self.cfg, t)
        prefix = None
        if self.perms is not None:
            prefix = np.cumsum(inv[self.perms], axis=1)
        total = 0.0
        for n in range(self.lo, self.hi + 1):
            if n == 1:
                avg = 1.0 / base
            elif n in self.exact:
                avg = float(np.mean(1.0 / (base + inv[self.exact[n]].sum(axis=1))))
            else:
                avg = float(np.mean(1.0 / (base + prefix[:, n - 2])))
            total += self.pmf[n - 1] * avg
        return total

    def rrr(self, t: int) -> float:
        base = t / self.cfg.sigma ** 2
        total = 0.0
        for n in range(self.lo, self.hi + 1):
            e = base
            if n > 1:
                e += float(rr_inverse_variances(self.cfg, t, ring=n).sum())
            total += self.pmf[n - 1] / e
        return total


def oracle_rr_mse(cfg: OracleCurveConfig, t: int) -> float:
    return OracleEvaluator(cfg).rr(t)


def oracle_rrr_mse(cfg: OracleCurveConfig, t: int) -> float:
    return OracleEvaluator(cfg).rrr(t)
