from __future__ import annotations

from typing import List, Optional

import numpy as np

from app.core.errors import ParameterError
from app.models.experiment import ScheduleKind


class PeerCursor:
    """Round-robin position over the agent's peers in index order, self skipped."""

    def __init__(self, agent_id: int, num_agents: int):
        if num_agents < 2:
            raise ParameterError("round robin needs at least 2 agents")
        self.agent_id = agent_id
        self.peers: List[int] = [b for b in range(num_agents) if b != agent_id]
        self.pos = 0

    def next_any(self) -> int:
        b = self.peers[self.pos]
        self.pos = (self.pos + 1) % len(self.peers)
        return b

    def next_eligible(self, class_estimate: np.ndarray) -> Optional[int]:
        # ineligible peers are passed over, not revisited this step
        for _ in range(len(self.peers)):
            b = self.peers[self.pos]
            self.pos = (self.pos + 1) % len(self.peers)
            if class_estimate[b]:
                return b
        return None


def choose_agent(state, schedule: ScheduleKind) -> Optional[int]:
    """Next peer for `state` (an AgentState) given C_a^(t-1)."""
    if schedule == ScheduleKind.rr:
        return state.cursor.next_any()
    return state.cursor.next_eligible(state.class_estimate)


def rr_peer_at(agent_id: int, num_agents: int, t: int) -> int:
    """Peer queried at time t under RR: position (t-1) mod (M-1) in the skip-self order."""
    pos = (t - 1) % (num_agents - 1)
    return pos if pos < agent_id else pos + 1


def rr_query_times(position: int, num_agents: int, t: int) -> List[int]:
    """Query times 1 + (i-1)(M-1) + position - 1 up to t, position being 1-based."""
    return list(range(position, t + 1, num_agents - 1))


def rr_kappa(position: int, num_agents: int, t: int) -> int:
    """Releases received from the peer at 1-based `position` by time t under RR."""
    if t <= 0:
        return 0
    base = (t - 1) // (num_agents - 1)
    if position <= (t - 1) % (num_agents - 1) + 1:
        return base + 1
    return base
