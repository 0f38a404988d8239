"""Trial orchestration: synchronized time loop, epochs, gossip and bookkeeping."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import rng as rngs
from ._kernels import play_phase
from .adversary import HONEST_MIMIC, Observation, get_strategy
from .bandit import ArmSet, ArmStats, ConfigError, ProtocolError, generate_synthetic_means
from .protocol import (
    FOREVER,
    HonestAgentState,
    Schedule,
    ceil_pow,
    epoch,
    incorporate_recommendation,
    most_played_in_phase,
    update_blocklist,
)

VARIANTS = ("blocking", "no-blocking", "no-communication", "oracle")


@dataclass(frozen=True)
class SimConfig:
    n: int
    m: int
    K: int
    T: int
    alpha: float = 4.0
    beta: float = 2.0
    eta: float = 2.0
    S: Optional[int] = None  # None -> ceil(K / n)
    variant: str = "blocking"
    strategy: str = "uniform"
    trials: int = 1
    master_seed: int = 0
    means: Optional[tuple] = None  # None -> synthetic means drawn per trial
    checkpoints: Optional[tuple] = None  # None -> log-spaced grid
    n_checkpoints: int = 200
    record_events: bool = True
    stream: Optional[int] = None  # protocol RNG stream; None -> per-variant default

    @property
    def sticky_size(self) -> int:
        return self.S if self.S is not None else math.ceil(self.K / self.n)

    @property
    def stream_id(self) -> int:
        if self.stream is not None:
            return self.stream
        return rngs.VARIANT_STREAMS[self.variant]

    @property
    def theorem2_valid(self) -> bool:
        return self.alpha > (3 + (1 + self.beta * self.eta) / self.beta) / 2

    @property
    def has_mimics(self) -> bool:
        return self.strategy == HONEST_MIMIC and self.m > 0

    def validate(self) -> "SimConfig":
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.m < 0:
            raise ConfigError("m must be >= 0")
        if self.T < 1:
            raise ConfigError("T must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.alpha > 0:
            raise ConfigError("alpha must be > 0")
        if not self.beta > 1:
            raise ConfigError("beta must be > 1")
        if not self.eta > 1:
            raise ConfigError("eta must be > 1")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}")
        if self.sticky_size < 1:
            raise ConfigError("S must be >= 1")
        if self.K < self.sticky_size + 2:
            raise ConfigError(f"need K >= S + 2 (K={self.K}, S={self.sticky_size})")
        if self.means is not None and len(self.means) != self.K:
            raise ConfigError(f"K={self.K} but {len(self.means)} arm means given")
        if self.strategy != HONEST_MIMIC:
            get_strategy(self.strategy)
        return self

    def checkpoint_grid(self) -> np.ndarray:
        if self.checkpoints is not None:
            grid = np.unique(np.asarray(self.checkpoints, dtype=np.int64))
            grid = grid[(grid >= 1) & (grid <= self.T)]
            return np.union1d(grid, [self.T]).astype(np.int64)
        return log_grid(self.T, self.n_checkpoints)


def log_grid(T: int, size: int = 200) -> np.ndarray:
    """About ``size`` log-spaced integer time steps in [1, T], always including T."""
    raw = np.logspace(0.0, math.log10(T), num=max(size, 1)) if T > 1 else np.ones(1)
    grid = np.unique(np.rint(raw).astype(np.int64))
    return np.union1d(grid[(grid >= 1) & (grid <= T)], [T]).astype(np.int64)


# --- event log -------------------------------------------------------------


class Contact(NamedTuple):
    trial: int
    phase: int
    asker: int
    peer: int
    rec_arm: int
    kind = "contact"


class Block(NamedTuple):
    trial: int
    phase: int
    blocker: int
    blocked: int
    until_phase: int
    kind = "block"


class Election(NamedTuple):
    trial: int
    phase: int
    agent: int
    most_played: int
    kind = "election"


class ActiveChange(NamedTuple):
    trial: int
    phase: int
    agent: int
    dropped: int
    added: int
    kind = "active-change"


RECORD_TYPES = {cls.kind: cls for cls in (Contact, Block, Election, ActiveChange)}


@dataclass
class EventLog:
    records: list = field(default_factory=list)

    def append(self, record) -> None:
        self.records.append(record)

    def of(self, cls) -> list:
        return [r for r in self.records if type(r) is cls]

    @property
    def contacts(self) -> list:
        return self.of(Contact)

    @property
    def blocks(self) -> list:
        return self.of(Block)

    @property
    def elections(self) -> list:
        return self.of(Election)

    @property
    def changes(self) -> list:
        return self.of(ActiveChange)

    def __len__(self) -> int:
        return len(self.records)

    @staticmethod
    def to_dict(record) -> dict:
        return {"kind": record.kind, **record._asdict()}

    @staticmethod
    def from_dict(data: dict):
        data = dict(data)
        cls = RECORD_TYPES[data.pop("kind")]
        data.pop("variant", None)
        return cls(**{k: int(data[k]) for k in cls._fields})


class Violation(NamedTuple):
    kind: str
    trial: int
    phase: int
    detail: str


class TauEstimate(NamedTuple):
    tau_stab: int
    tau: int
    stab_censored: bool
    tau_censored: bool
    j_max: int


@dataclass
class TrialResult:
    trial: int
    variant: str
    arms: ArmSet
    sticky: list
    checkpoints: np.ndarray
    checkpoint_counts: np.ndarray  # (n, C, K) honest agents only
    regret: np.ndarray  # (n, C)
    final_counts: np.ndarray  # (n, K)
    arm1_active: np.ndarray  # (J_max, n)
    arm1_elected: np.ndarray  # (J_max, n)
    tau: TauEstimate
    events: Optional[EventLog]

    @property
    def final_regret(self) -> np.ndarray:
        return self.regret[:, -1]

    @property
    def mean_final_regret(self) -> float:
        return float(np.mean(self.final_regret))


@dataclass
class RunResult:
    config: SimConfig
    trials: list

    @property
    def per_trial_regret(self) -> np.ndarray:
        """Per-agent average final regret of each trial, in trial order."""
        return np.array([tr.mean_final_regret for tr in self.trials])

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_trial_regret))

    @property
    def std(self) -> float:
        values = self.per_trial_regret
        return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


# --- setup -----------------------------------------------------------------


def generate_sticky_sets(n: int, K: int, S: int, rng: np.random.Generator) -> list:
    """n uniformly random S-subsets of the arms, resampled until arm 0 is covered."""
    if not 1 <= S <= K - 2:
        raise ConfigError(f"need 1 <= S <= K - 2 (S={S}, K={K})")
    while True:
        sets = [np.sort(rng.choice(K, size=S, replace=False)).astype(np.int64) for _ in range(n)]
        if any(0 in s for s in sets):
            return sets


def trial_arms(config: SimConfig, trial: int) -> ArmSet:
    if config.means is not None:
        return ArmSet.from_means(config.means)
    return generate_synthetic_means(config.K, rngs.substream(config.master_seed, trial, rngs.ARMS))


@dataclass
class Roster:
    """Everything Get-Rec needs to answer a query."""

    n: int
    m: int
    K: int
    states: dict  # agent id -> HonestAgentState (honest agents and mimics)
    strategy: object
    malicious_rngs: dict
    gossip_rngs: dict


def get_rec(asker: HonestAgentState, j: int, roster: Roster) -> Optional[tuple[int, int]]:
    """Sample a non-blocked peer and return (peer, recommended arm), or None."""
    allowed = asker.blocklist.unblock_phase < j
    allowed[asker.agent_id] = False
    candidates = np.flatnonzero(allowed)
    if candidates.size == 0:
        return None
    gossip = roster.gossip_rngs[asker.agent_id]
    peer = int(candidates[gossip.integers(candidates.size)])
    peer_state = roster.states.get(peer)
    if peer_state is not None:
        return peer, int(peer_state.most_played)
    counts = asker.stats.pull_count.copy()
    counts.setflags(write=False)
    obs = Observation(asker.agent_id, j, asker.active_set, counts, roster.K)
    rec = roster.strategy(j, asker.agent_id, obs, roster.malicious_rngs[peer])
    rec = int(rec)
    if not 0 <= rec < roster.K:
        raise ProtocolError(f"strategy returned arm {rec} outside [0, {roster.K})")
    return peer, rec


# --- trial -----------------------------------------------------------------


def run_trial(config: SimConfig, trial: int) -> TrialResult:
    config.validate()
    arms = trial_arms(config, trial)
    K, S, n, m = arms.K, config.sticky_size, config.n, config.m
    seed, stream = config.master_seed, config.stream_id
    n_play = n + m if config.has_mimics else n
    sticky = generate_sticky_sets(n_play, K, S, rngs.substream(seed, trial, rngs.STICKY))
    schedule = Schedule(config.beta)
    isolated = config.variant == "no-communication"

    ck_times = config.checkpoint_grid()
    counts = np.zeros((n_play, K), dtype=np.int64)
    sums = np.zeros((n_play, K), dtype=np.int64)
    ck_counts = np.zeros((n_play, ck_times.size, K), dtype=np.int64)
    reward_rngs = [rngs.substream(seed, trial, rngs.REWARD, stream, i) for i in range(n_play)]

    states: dict = {}
    if isolated:
        active = np.tile(np.arange(K, dtype=np.int64), (n_play, 1))
    else:
        active = np.empty((n_play, S + 2), dtype=np.int64)
        for i in range(n_play):
            states[i] = HonestAgentState.create(
                i, sticky[i], K, n + m, rngs.substream(seed, trial, rngs.PROTOCOL, stream, i),
                stats=ArmStats(counts[i], sums[i]), active=active[i],
            )
            if config.variant == "oracle" and m > 0:
                unblock = states[i].blocklist.unblock_phase
                unblock[n:] = FOREVER
                if i >= n:
                    unblock[i] = 0
    roster = Roster(
        n=n, m=m, K=K, states=states,
        strategy=None if config.strategy == HONEST_MIMIC else get_strategy(config.strategy),
        malicious_rngs={} if config.has_mimics else {
            i: rngs.substream(seed, trial, rngs.MALICIOUS, stream, i) for i in range(n, n + m)
        },
        gossip_rngs={i: rngs.substream(seed, trial, rngs.GOSSIP, stream, i) for i in range(n_play)},
    )
    log = EventLog() if config.record_events and not isolated else None
    arm1_active, arm1_elected = [], []

    phase_start = counts.copy()
    t_prev, j = 0, 1
    while t_prev < config.T:
        a_j = epoch(j, schedule)
        t_end = min(a_j, config.T)
        uniforms = np.stack([g.random(t_end - t_prev) for g in reward_rngs])
        play_phase(arms.means, counts, sums, active, t_prev + 1, t_end, float(config.alpha), uniforms, ck_times, ck_counts)
        if t_end == a_j:
            if isolated:
                # every arm is always active; record the elections only for the tau estimate
                within = counts[:n] - phase_start[:n]
                arm1_active.append(np.ones(n, dtype=bool))
                arm1_elected.append(np.argmax(within, axis=1) == 0)
                phase_start[:] = counts
            else:
                _check_phase(states, t_end, S)
                _run_epoch(config, trial, j, roster, log, arm1_active, arm1_elected)
        t_prev = t_end
        j += 1

    arm1_active_arr = np.array(arm1_active, dtype=bool).reshape(-1, n)
    arm1_elected_arr = np.array(arm1_elected, dtype=bool).reshape(-1, n)

    honest_ck = ck_counts[:n]
    regret = regret_from_counts(honest_ck, arms.gaps)
    return TrialResult(
        trial=trial,
        variant=config.variant,
        arms=arms,
        sticky=sticky,
        checkpoints=ck_times,
        checkpoint_counts=honest_ck,
        regret=regret,
        final_counts=counts[:n].copy(),
        arm1_active=arm1_active_arr,
        arm1_elected=arm1_elected_arr,
        tau=estimate_tau(arm1_active_arr, arm1_elected_arr),
        events=log,
    )


def regret_from_counts(counts: np.ndarray, gaps: np.ndarray) -> np.ndarray:
    """sum_k gaps[k] * counts[..., k], correctly rounded so the value never depends on summation order."""
    products = counts * gaps
    flat = products.reshape(-1, products.shape[-1])
    return np.array([math.fsum(row) for row in flat]).reshape(products.shape[:-1])


def _check_phase(states: dict, t: int, S: int) -> None:
    for st in states.values():
        pulls = st.stats.pull_count
        if int(pulls.sum()) != t:
            raise ProtocolError(f"agent {st.agent_id}: {int(pulls.sum())} pulls at t={t}")
        if st.active.size != S + 2 or np.unique(st.active).size != S + 2:
            raise ProtocolError(f"agent {st.agent_id}: active set {st.active.tolist()} is not {S + 2} distinct arms")
        if not st.sticky_set <= st.active_set:
            raise ProtocolError(f"agent {st.agent_id}: sticky arms missing from active set")
        delta = pulls - st.phase_start_counts
        delta[st.active] = 0
        if delta.any():
            raise ProtocolError(f"agent {st.agent_id}: pulled inactive arms {np.flatnonzero(delta).tolist()}")


def _run_epoch(config: SimConfig, trial: int, j: int, roster: Roster, log: Optional[EventLog],
               arm1_active: list, arm1_elected: list) -> None:
    states = roster.states
    for i, st in states.items():
        st.most_played = most_played_in_phase(st)
        if log is not None:
            log.append(Election(trial, j, i, st.most_played))
    honest = [states[i] for i in range(config.n)]
    arm1_active.append(np.array([0 in st.sticky_set or st.u_arm == 0 or st.l_arm == 0 for st in honest]))
    arm1_elected.append(np.array([st.most_played == 0 for st in honest]))

    for i, st in states.items():
        if config.variant == "blocking":
            event = update_blocklist(st, j, config.eta)
            if event is not None and log is not None:
                log.append(Block(trial, j, i, event.peer, event.until))
        answer = get_rec(st, j, roster)
        if answer is None:
            st.last_peer = st.last_rec = None
            continue
        peer, rec = answer
        if log is not None:
            log.append(Contact(trial, j, i, peer, rec))
        change = incorporate_recommendation(st, rec)
        if change is not None and log is not None:
            log.append(ActiveChange(trial, j, i, change[0], change[1]))
        st.last_peer, st.last_rec = peer, rec
    for st in states.values():
        st.start_phase()


def estimate_tau(arm1_active: np.ndarray, arm1_elected: np.ndarray) -> TauEstimate:
    """Horizon-censored estimates of the stabilization phase and the spreading phase.

    Rows are phases 1..J_max, columns honest agents. ``tau_stab`` is the first
    phase from which arm 0 wins every election in which it is active;
    ``tau`` (>= tau_stab) the first phase from which arm 0 is active and wins
    for every agent. An estimate is censored when its condition does not hold
    before the last complete phase.
    """
    active = np.asarray(arm1_active, dtype=bool)
    elected = np.asarray(arm1_elected, dtype=bool)
    j_max = active.shape[0]
    if j_max == 0:
        return TauEstimate(0, 0, True, True, 0)
    stab_ok = np.all(~active | elected, axis=1)
    full_ok = np.all(active & elected, axis=1)

    def first_stable(ok: np.ndarray) -> int:
        bad = np.flatnonzero(~ok)
        return 1 if bad.size == 0 else int(bad[-1]) + 2

    tau_stab = first_stable(stab_ok)
    tau = max(tau_stab, first_stable(full_ok))
    tau_stab, tau = min(tau_stab, j_max), min(tau, j_max)
    return TauEstimate(tau_stab, tau, tau_stab >= j_max, tau >= j_max, j_max)


def verify_event_log(log: EventLog, eta: float) -> list:
    """Check blocklist-window, active-change and block-justification semantics."""
    contacts = {}
    contact_phases = {}
    elections = {}
    for r in log.records:
        if type(r) is Contact:
            contacts[(r.trial, r.asker, r.phase)] = r
            contact_phases.setdefault((r.trial, r.asker, r.peer), []).append(r.phase)
        elif type(r) is Election:
            elections[(r.trial, r.agent, r.phase)] = r.most_played

    violations = []
    for b in log.blocks:
        window_end = ceil_pow(b.phase, eta)
        if b.until_phase < window_end:
            violations.append(Violation("short-window", b.trial, b.phase,
                                        f"agent {b.blocker} blocked {b.blocked} until {b.until_phase} < {window_end}"))
        for phase in contact_phases.get((b.trial, b.blocker, b.blocked), ()):
            if b.phase <= phase <= window_end:
                violations.append(Violation("contact-in-window", b.trial, phase,
                                            f"agent {b.blocker} contacted {b.blocked} inside block window "
                                            f"[{b.phase}, {window_end}]"))
        prev = contacts.get((b.trial, b.blocker, b.phase - 1))
        elected = elections.get((b.trial, b.blocker, b.phase))
        if prev is None or prev.peer != b.blocked or elected is None or elected == prev.rec_arm:
            violations.append(Violation("unjustified-block", b.trial, b.phase,
                                        f"agent {b.blocker} blocked {b.blocked} without a failed recommendation"))
    for c in log.changes:
        rec = contacts.get((c.trial, c.agent, c.phase))
        if rec is None or rec.rec_arm != c.added:
            violations.append(Violation("unjustified-active-change", c.trial, c.phase,
                                        f"agent {c.agent} added arm {c.added} without a matching recommendation"))
    return violations


def block_spacing_violations(log: EventLog, eta: float) -> list:
    """Consecutive blocks of the same peer by the same agent must start after the previous window."""
    phases = {}
    for b in log.blocks:
        phases.setdefault((b.trial, b.blocker, b.blocked), []).append(b.phase)
    out = []
    for (trial, blocker, blocked), js in phases.items():
        js.sort()
        for prev, nxt in zip(js, js[1:]):
            if not nxt > ceil_pow(prev, eta):
                out.append(Violation("block-spacing", trial, nxt,
                                     f"agent {blocker} re-blocked {blocked} at {nxt} <= ceil({prev}^eta)"))
    return out


def run_trials(config: SimConfig, workers: int = 1, trial_indices: Sequence[int] | None = None) -> RunResult:
    """Run ``config.trials`` independent trials; results are in trial order."""
    config.validate()
    indices = list(range(config.trials)) if trial_indices is None else list(trial_indices)
    if workers <= 1 or len(indices) <= 1:
        results = [run_trial(config, t) for t in indices]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_trial, [config] * len(indices), indices))
    return RunResult(config, results)
