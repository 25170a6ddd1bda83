from __future__ import annotations

import math
from typing import List, Optional

import numpy as np

from app.core.errors import ProtocolError
from app.privacy.mechanisms import MechanismKind, Release
from app.stats.variance import data_variance_factor, noise_variance_term, nonmom_variance
from app.stats.weights import WeightScheme, scheme_weights

INF = math.inf


class PeerStatistic:
    """
    Agent a's record of T_{b->a}.

    Before the first release T = 0 and every variance is +inf. Schemes that
    weight past releases keep the full history (bounded by history_cap);
    keep-last only needs the newest release, whose noise variance the
    mechanism already reports in closed form.
    """

    def __init__(
        self,
        scheme: WeightScheme,
        kind: MechanismKind,
        sigma_dp_sq: float,
        sigma_b_sq: Optional[float] = None,
        history_cap: int = 0,
    ):
        self.scheme = scheme
        self.kind = kind
        self.sigma_dp_sq = float(sigma_dp_sq)
        self.sigma_b_sq = sigma_b_sq
        self.history_cap = history_cap

        self.kappa = 0
        self.last_time = 0
        self.query_times: List[int] = []
        self.releases: List[Release] = []
        self.T_value = 0.0
        self.data_factor = INF
        self.noise_var_component = INF
        self.V_estimate = INF

    @property
    def keeps_history(self) -> bool:
        return self.scheme.needs_history

    def weights(self) -> np.ndarray:
        return scheme_weights(self.scheme, self.kappa)

    def update(self, r: Release) -> "PeerStatistic":
        if r.time <= self.last_time:
            raise ProtocolError(f"release at t={r.time} does not follow t={self.last_time}")
        if self.keeps_history and self.history_cap and self.kappa >= self.history_cap:
            raise ProtocolError(
                f"release history cap {self.history_cap} exceeded; raise COLME_HISTORY_CAP or use non_mom"
            )
        self.kappa += 1
        self.last_time = r.time

        if not self.keeps_history:
            self.query_times = [r.time]
            self.releases = [r]
            self.T_value = r.noisy_mean
            self.data_factor = 1.0 / r.time
            self.noise_var_component = r.noise_variance
            return self
        self.query_times.append(r.time)
        self.releases.append(r)
        w = self.weights()
        means = np.fromiter((x.noisy_mean for x in self.releases), dtype=float, count=self.kappa)
        self.T_value = float(np.dot(w, means))
        self.data_factor = data_variance_factor(self.query_times, w)
        self.noise_var_component = noise_variance_term(self.kind, self.query_times, w, self.sigma_dp_sq)
        return self

    # -------- variances --------
    @property
    def data_var_component(self) -> float:
        if self.sigma_b_sq is None:
            raise ProtocolError("data variance unknown for this peer; use estimated_variance")
        if self.kappa == 0:
            return INF
        return self.sigma_b_sq * self.data_factor

    def variance(self) -> float:
        if self.kappa == 0:
            return INF
        return self.data_var_component + self.noise_var_component

    def estimated_variance(self) -> float:
        if self.kappa == 0 or math.isinf(self.V_estimate):
            return INF
        return self.V_estimate * self.data_factor + self.noise_var_component


def update_statistic(ps: PeerStatistic, r: Release) -> PeerStatistic:
    return ps.update(r)


def estimated_variance(
    ps: PeerStatistic, kind: Optional[MechanismKind] = None, sigma_dp_sq: Optional[float] = None
) -> float:
    """
    V_{b->a} * (data quadrature) + noise term. With an explicit mechanism and
    noise level the noise term is re-evaluated from the stored history.
    """
    if kind is None and sigma_dp_sq is None:
        return ps.estimated_variance()
    if ps.kappa == 0 or math.isinf(ps.V_estimate):
        return INF
    kind = kind or ps.kind
    sigma = ps.sigma_dp_sq if sigma_dp_sq is None else sigma_dp_sq
    if ps.keeps_history:
        noise = noise_variance_term(kind, ps.query_times, ps.weights(), sigma)
    else:
        noise = nonmom_variance(kind, ps.kappa, ps.last_time, 0.0, sigma)
    return ps.V_estimate * ps.data_factor + noise
