"""Honest-agent protocol: phase schedule, active sets, elections and blocklists."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .bandit import ArmStats, ConfigError

FOREVER = np.iinfo(np.int64).max


def ceil_pow(j: int, exponent: float) -> int:
    """ceil(j ** exponent), robust to float noise on exact integer powers."""
    if j <= 0:
        return 0
    value = float(j) ** exponent
    nearest = round(value)
    if abs(value - nearest) <= 1e-9 * max(1.0, value):
        return int(nearest)
    return int(math.ceil(value))


@dataclass(frozen=True)
class Schedule:
    beta: float

    def __post_init__(self):
        if not self.beta > 1:
            raise ConfigError(f"beta must exceed 1, got {self.beta}")

    def epoch(self, j: int) -> int:
        return epoch(j, self)


def epoch(j: int, schedule: Schedule) -> int:
    """End time of phase j; phase j covers epoch(j-1)+1 ... epoch(j)."""
    if j < 0:
        raise ValueError("phase index must be non-negative")
    return ceil_pow(j, schedule.beta)


class BlockList:
    """Unblock phase per peer; a peer is blocked while the phase is <= its entry."""

    __slots__ = ("owner", "unblock_phase")

    def __init__(self, owner: int, n_agents: int):
        self.owner = owner
        self.unblock_phase = np.zeros(n_agents, dtype=np.int64)

    def block(self, peer: int, until: int) -> int:
        if peer == self.owner:
            raise ValueError("an agent never blocks itself")
        merged = max(int(self.unblock_phase[peer]), int(until))
        self.unblock_phase[peer] = merged
        return merged

    def blocked_at(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.unblock_phase >= j)


def is_blocked(blocklist: BlockList, peer: int, j: int) -> bool:
    return bool(blocklist.unblock_phase[peer] >= j)


class BlockEvent(NamedTuple):
    peer: int
    phase: int
    until: int


@dataclass
class HonestAgentState:
    """State of one agent running the phased protocol.

    ``stats`` arrays and ``active`` may be views into engine-wide buffers;
    they are only ever modified in place.
    """

    agent_id: int
    sticky: np.ndarray
    u_arm: int
    l_arm: int
    stats: ArmStats
    active: np.ndarray
    blocklist: BlockList
    phase_start_counts: np.ndarray
    last_peer: Optional[int] = None
    last_rec: Optional[int] = None
    most_played: Optional[int] = None
    sticky_set: frozenset = field(init=False, repr=False)

    def __post_init__(self):
        self.sticky_set = frozenset(int(a) for a in self.sticky)
        self._refresh_active()

    @classmethod
    def create(cls, agent_id: int, sticky, K: int, n_agents: int, rng: np.random.Generator,
               stats: ArmStats | None = None, active: np.ndarray | None = None) -> "HonestAgentState":
        sticky = np.sort(np.asarray(sticky, dtype=np.int64))
        others = np.setdiff1d(np.arange(K, dtype=np.int64), sticky)
        if others.size < 2:
            raise ConfigError(f"need K >= S + 2 (K={K}, S={sticky.size})")
        u, l = rng.choice(others, size=2, replace=False)
        if stats is None:
            stats = ArmStats.zeros(K)
        if active is None:
            active = np.empty(sticky.size + 2, dtype=np.int64)
        return cls(
            agent_id=agent_id,
            sticky=sticky,
            u_arm=int(u),
            l_arm=int(l),
            stats=stats,
            active=active,
            blocklist=BlockList(agent_id, n_agents),
            phase_start_counts=stats.pull_count.copy(),
        )

    def _refresh_active(self) -> None:
        arms = np.append(self.sticky, [self.u_arm, self.l_arm])
        arms.sort()
        self.active[:] = arms

    @property
    def active_set(self) -> frozenset:
        return frozenset(int(a) for a in self.active)

    def within_phase_counts(self, arms) -> np.ndarray:
        arms = np.asarray(arms)
        return self.stats.pull_count[arms] - self.phase_start_counts[arms]

    def start_phase(self) -> None:
        self.phase_start_counts[:] = self.stats.pull_count


def most_played_in_phase(state: HonestAgentState) -> int:
    """Active arm with the most pulls since the phase started; lowest arm on ties."""
    arms = state.active
    within = state.within_phase_counts(arms)
    # active is sorted, argmax returns the first maximum
    return int(arms[int(np.argmax(within))])


def update_blocklist(state: HonestAgentState, j: int, eta: float) -> Optional[BlockEvent]:
    """Block the previous recommender if its arm did not win this phase's election."""
    if j <= 1 or state.last_peer is None:
        return None
    if state.most_played == state.last_rec:
        return None
    until = ceil_pow(j, eta)
    state.blocklist.block(state.last_peer, until)
    return BlockEvent(state.last_peer, j, until)


def incorporate_recommendation(state: HonestAgentState, rec: int) -> Optional[tuple[int, int]]:
    """Swap ``rec`` into the active set; returns (dropped, added) or None if unchanged."""
    rec = int(rec)
    if rec in state.sticky_set or rec == state.u_arm or rec == state.l_arm:
        return None
    u_pulls, l_pulls = state.within_phase_counts([state.u_arm, state.l_arm])
    if l_pulls > u_pulls:
        dropped = state.u_arm
        state.u_arm = state.l_arm
    else:
        dropped = state.l_arm
    state.l_arm = rec
    state._refresh_active()
    return dropped, rec
