from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import ProtocolError
from app.core.rng import assignment_rng, protocol_rng
from app.models.experiment import AssignmentKind, ClassEstimator, ScheduleKind, SimConfig, VarianceMode
from app.models.privacy import NoiseKind, PrivacyParams
from app.models.results import RunResult, SeedRun
from app.noise.calibration import sigma2_dp_squared, sigma_dp_squared
from app.noise.distributions import AgentSampler
from app.privacy.budget import ChannelBudget, channel_budget
from app.privacy.mechanisms import ReleaseChannel, open_channel
from app.protocol.agent import AgentState, PeerLink
from app.protocol.combine import combine_estimate
from app.protocol.schedule import choose_agent
from app.stats.statistic import PeerStatistic
from app.varest.schvar1 import SchVar1State
from app.varest.schvar2 import SchVar2State

Pair = Tuple[int, int]  # (responder b, querier a)


def draw_class_assignment(config: SimConfig, seed: int) -> np.ndarray:
    if config.assignment == AssignmentKind.explicit:
        return np.asarray(config.classes, dtype=int)
    return assignment_rng(seed).integers(0, config.num_classes, size=config.agents)


@dataclass
class World:
    config: SimConfig
    seed: int
    rng: np.random.Generator
    classes: np.ndarray
    true_means: np.ndarray
    agents: List[AgentState]
    sampler: AgentSampler
    mean_params: Optional[PrivacyParams]
    variance_params: Optional[PrivacyParams]
    sigma_dp_sq: float
    sigma2_dp_sq: float
    noise_kind: NoiseKind
    channels: Dict[Pair, ReleaseChannel] = field(default_factory=dict)
    var_channels: Dict[Pair, SchVar1State] = field(default_factory=dict)
    t: int = 0

    def channel(self, b: int, a: int) -> ReleaseChannel:
        ch = self.channels.get((b, a))
        if ch is None:
            ch = open_channel(
                self.config.mechanism,
                self.sigma_dp_sq,
                self.noise_kind,
                track_subsums=self.config.variance_mode == VarianceMode.schvar1,
            )
            self.channels[(b, a)] = ch
        return ch

    def var_channel(self, b: int, a: int) -> SchVar1State:
        st = self.var_channels.get((b, a))
        if st is None:
            st = SchVar1State(self.sigma2_dp_sq, self.noise_kind)
            self.var_channels[(b, a)] = st
        return st

    def same_class(self) -> np.ndarray:
        return self.classes[:, None] == self.classes[None, :]

    def squared_error(self) -> float:
        est = np.fromiter((ag.estimate for ag in self.agents), dtype=float, count=len(self.agents))
        return float(np.mean((est - self.true_means) ** 2))

    def class_accuracy(self) -> float:
        truth = self.same_class()
        m = len(self.agents)
        off = ~np.eye(m, dtype=bool)
        est = np.stack([ag.class_estimate for ag in self.agents])
        return float(np.mean((est == truth)[off]))

    def budgets(self) -> List[ChannelBudget]:
        if self.mean_params is None:
            return []
        return [
            channel_budget(b, a, self.config.mechanism, ch.kappa, self.mean_params, self.variance_params)
            for (b, a), ch in sorted(self.channels.items())
            if ch.kappa > 0
        ]


def build_world(config: SimConfig, seed: int) -> World:
    config.check_supported()
    mean_p, var_p = config.privacy_params()
    sigma_dp = sigma_dp_squared(mean_p) if mean_p is not None else 0.0
    sigma2_dp = sigma2_dp_squared(var_p) if var_p is not None else 0.0
    noise_kind = config.privacy.noise_kind if config.privacy is not None else NoiseKind.gaussian

    classes = draw_class_assignment(config, seed)
    dists = [config.class_distribution(int(c)) for c in classes]
    sigma_sq = np.array([d.variance for d in dists])
    cap = config.history_cap if config.history_cap is not None else settings.history_cap

    agents: List[AgentState] = []
    for a, dist in enumerate(dists):
        ag = AgentState(a, config.agents, dist, config.decision_mode, sigma_sq)
        for b in range(config.agents):
            if b == a:
                continue
            ps = PeerStatistic(config.weights, config.mechanism, sigma_dp, sigma_b_sq=sigma_sq[b], history_cap=cap)
            sv2 = None
            if config.variance_mode in (VarianceMode.schvar2, VarianceMode.schvar2_bayes):
                sv2 = SchVar2State(
                    sigma_dp,
                    include_first_segment=config.include_first_segment,
                    bayesian=config.variance_mode == VarianceMode.schvar2_bayes,
                    prior=config.prior,
                )
            ag.peers[b] = PeerLink(statistic=ps, schvar2=sv2)
        agents.append(ag)

    return World(
        config=config,
        seed=seed,
        rng=protocol_rng(seed),
        classes=classes,
        true_means=np.array([d.mean for d in dists]),
        agents=agents,
        sampler=AgentSampler(dists),
        mean_params=mean_p,
        variance_params=var_p,
        sigma_dp_sq=sigma_dp,
        sigma2_dp_sq=sigma2_dp,
        noise_kind=noise_kind,
    )


def _query(world: World, a: int, b: int, t: int) -> None:
    responder = world.agents[b]
    ch = world.channel(b, a)
    # responder already holds X_b^(t)
    r = ch.release_mean(float(responder.acc.total), t, world.rng)
    link = world.agents[a].link(b)
    link.statistic.update(r)

    mode = world.config.variance_mode
    if mode == VarianceMode.schvar1:
        link.statistic.V_estimate = world.var_channel(b, a).update(
            ch.subsums,
            t,
            float(responder.acc.total),
            float(responder.acc.total_sq),
            r.noisy_mean,
            ch.sigma_dp_sq,
            world.rng,
        )
    elif link.schvar2 is not None:
        link.statistic.V_estimate = link.schvar2.update(r, world.config.mechanism)
    world.agents[a].refresh_peer(b)


def step(world: World, t: int, rng: Optional[np.random.Generator] = None) -> World:
    if t != world.t + 1:
        raise ProtocolError(f"step expected t={world.t + 1}, got {t}")
    if rng is not None:
        world.rng = rng
    cfg = world.config

    x = world.sampler.draw(world.rng)
    for ag, xa in zip(world.agents, x):
        ag.receive(float(xa))

    if cfg.class_estimator == ClassEstimator.local:
        for ag in world.agents:
            ag.estimate = ag.mean
            ag.estimate_variance = ag.own_variance()
        world.t = t
        return world

    # queries use C_a^(t-1)
    for ag in world.agents:
        b = choose_agent(ag, cfg.schedule)
        if b is not None:
            _query(world, ag.id, b, t)

    theta = cfg.decision.theta.at(t)
    truth = world.same_class() if cfg.class_estimator == ClassEstimator.oracle else None
    for ag in world.agents:
        if truth is not None:
            ag.force_class(truth[ag.id])
        else:
            ag.decide(theta, keep_excluded=cfg.schedule == ScheduleKind.rrr)
        combine_estimate(ag)

    world.t = t
    return world


def run_seed(config: SimConfig, seed: int) -> SeedRun:
    world = build_world(config, seed)
    mse = np.empty(config.t_max)
    for t in range(1, config.t_max + 1):
        step(world, t)
        mse[t - 1] = world.squared_error()
    return SeedRun(
        seed=seed,
        mse=mse,
        class_accuracy=world.class_accuracy() if config.t_max else 1.0,
        classes=world.classes.copy(),
        final_estimates=np.array([ag.estimate for ag in world.agents]),
        kappas={pair: ch.kappa for pair, ch in world.channels.items()},
    )


def merge_budgets(config: SimConfig, runs: Sequence[SeedRun]) -> List[ChannelBudget]:
    """Per channel budget at the largest release count seen over all seeds."""
    mean_p, var_p = config.privacy_params()
    if mean_p is None:
        return []
    worst: Dict[Pair, int] = {}
    for r in runs:
        for pair, k in r.kappas.items():
            if k > worst.get(pair, 0):
                worst[pair] = k
    return [channel_budget(b, a, config.mechanism, k, mean_p, var_p) for (b, a), k in sorted(worst.items())]


def aggregate(config: SimConfig, runs: Sequence[SeedRun]) -> RunResult:
    runs = sorted(runs, key=lambda r: r.seed)
    if runs:
        per_seed = np.stack([r.mse for r in runs])
    else:
        per_seed = np.zeros((0, config.t_max))
    n = per_seed.shape[0]
    mean = per_seed.mean(axis=0) if n else np.zeros(config.t_max)
    if n > 1:
        stderr = per_seed.std(axis=0, ddof=1) / np.sqrt(n)
    else:
        stderr = np.zeros(config.t_max)
    acc = [r.class_accuracy for r in runs]
    return RunResult(
        config=config,
        seeds=[r.seed for r in runs],
        per_seed=per_seed,
        mse_mean=mean,
        mse_stderr=stderr,
        class_accuracy=float(np.mean(acc)) if acc else float("nan"),
        class_accuracy_per_seed=acc,
        budgets=merge_budgets(config, runs),
        runs=list(runs),
    )


def run(config: SimConfig, seeds: Sequence[int]) -> RunResult:
    """Sequential sweep; the service layer fans seeds out over a process pool."""
    config.check_supported()
    return aggregate(config, [run_seed(config, s) for s in seeds])
