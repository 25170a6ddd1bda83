from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from app.models.experiment import DecisionMode
from app.models.privacy import DataDistribution
from app.protocol.decision import known_variance_accepts, welch_accepts
from app.protocol.schedule import PeerCursor
from app.stats.statistic import PeerStatistic
from app.varest.own import OwnVarianceAccumulator
from app.varest.schvar2 import SchVar2State


@dataclass
class PeerLink:
    statistic: PeerStatistic
    schvar2: Optional[SchVar2State] = None


class AgentState:
    """
    One agent's view: own accumulators, class estimate C_a^(t), one
    PeerLink per peer and the current estimate mu_a^(t).

    Per-peer scalars are mirrored into arrays indexed by agent id so the
    decision rule runs over all peers at once.
    """

    def __init__(
        self,
        agent_id: int,
        num_agents: int,
        distribution: DataDistribution,
        decision_mode: DecisionMode,
        peer_sigma_sq: np.ndarray,
    ):
        self.id = agent_id
        self.num_agents = num_agents
        self.distribution = distribution
        self.sigma_sq = distribution.variance
        self.decision_mode = decision_mode
        self.acc = OwnVarianceAccumulator()
        self.cursor = PeerCursor(agent_id, num_agents)
        self.class_estimate = np.ones(num_agents, dtype=bool)
        self.peers: Dict[int, PeerLink] = {}

        self.peer_sigma_sq = np.asarray(peer_sigma_sq, dtype=float)
        self.T = np.zeros(num_agents)
        self.data_factor = np.full(num_agents, np.inf)
        self.noise_var = np.full(num_agents, np.inf)
        self.v_est = np.full(num_agents, np.inf)
        self.t_kappa = np.zeros(num_agents)

        self.estimate = 0.0
        self.estimate_variance = np.inf
        self.alphas: Dict[int, float] = {agent_id: 1.0}

    # -------- stream --------
    def receive(self, x: float) -> None:
        self.acc.push(x)

    @property
    def t(self) -> int:
        return self.acc.count

    @property
    def mean(self) -> float:
        return float(self.acc.mean)

    def own_variance(self) -> float:
        """Variance of X-bar_a: sigma_a^2/t or V_a/t."""
        if self.t == 0:
            return np.inf
        if self.decision_mode == DecisionMode.known_variance:
            return self.sigma_sq / self.t
        return float(self.acc.variance()) / self.t

    # -------- peers --------
    def link(self, b: int) -> PeerLink:
        return self.peers[b]

    def refresh_peer(self, b: int) -> None:
        ps = self.peers[b].statistic
        self.T[b] = ps.T_value
        self.data_factor[b] = ps.data_factor
        self.noise_var[b] = ps.noise_var_component
        self.v_est[b] = ps.V_estimate
        self.t_kappa[b] = ps.last_time

    def peer_variances(self) -> np.ndarray:
        """Var(T_{b->a}) with known sigma_b, or its estimate from V_{b->a}."""
        if self.decision_mode == DecisionMode.known_variance:
            scale = self.peer_sigma_sq
        else:
            scale = self.v_est
        with np.errstate(invalid="ignore"):
            out = np.where(np.isinf(self.data_factor), np.inf, scale * self.data_factor + self.noise_var)
        out[self.id] = np.inf
        return out

    def accepted_peers(self) -> np.ndarray:
        mask = self.class_estimate.copy()
        mask[self.id] = False
        return np.flatnonzero(mask)

    # -------- class estimate --------
    def decide(self, theta: float, keep_excluded: bool = False) -> np.ndarray:
        """
        Re-test every peer against theta. With keep_excluded (rRR) a peer
        already outside C_a stays out: the cursor never queries it again.
        """
        t = self.t
        diff = self.mean - self.T
        var_t = self.peer_variances()
        if self.decision_mode == DecisionMode.known_variance:
            accept = known_variance_accepts(diff, self.sigma_sq / t, var_t, theta)
        else:
            accept = welch_accepts(diff, float(self.acc.variance()), t, var_t, self.t_kappa, theta)
        if keep_excluded:
            accept &= self.class_estimate
        accept[self.id] = True
        self.class_estimate = accept
        return accept

    def force_class(self, members: np.ndarray) -> None:
        c = np.asarray(members, dtype=bool).copy()
        c[self.id] = True
        self.class_estimate = c
