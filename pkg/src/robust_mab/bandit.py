"""Bernoulli bandit instance, per-agent arm statistics and the UCB(alpha) index.

Arms are 0-indexed throughout the package: arm 0 is the unique best arm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration or input data."""


class ProtocolError(RuntimeError):
    """An internal protocol invariant was violated (engine bug)."""


@dataclass(frozen=True)
class ArmSet:
    """K Bernoulli arm means, relabeled so that means are non-increasing.

    ``labels[k]`` is the position of sorted arm ``k`` in the input sequence.
    """

    means: np.ndarray
    labels: np.ndarray = field(repr=False)

    @classmethod
    def from_means(cls, means) -> "ArmSet":
        raw = np.asarray(means, dtype=np.float64).ravel()
        if raw.size < 1:
            raise ConfigError("need at least one arm")
        if np.any(~np.isfinite(raw)) or np.any(raw < 0.0) or np.any(raw > 1.0):
            raise ConfigError("arm means must lie in [0, 1]")
        order = np.argsort(-raw, kind="stable")
        sorted_means = raw[order]
        if sorted_means.size > 1 and not sorted_means[0] > sorted_means[1]:
            raise ConfigError(f"best arm is not unique: top two means are both {sorted_means[0]!r}")
        sorted_means.setflags(write=False)
        order.setflags(write=False)
        return cls(sorted_means, order)

    @property
    def K(self) -> int:
        return int(self.means.size)

    @property
    def gaps(self) -> np.ndarray:
        return self.means[0] - self.means


@dataclass
class ArmStats:
    """Pull counts and unit-reward counts for one agent."""

    pull_count: np.ndarray
    reward_sum: np.ndarray

    @classmethod
    def zeros(cls, K: int) -> "ArmStats":
        return cls(np.zeros(K, dtype=np.int64), np.zeros(K, dtype=np.int64))

    def mean_estimate(self, arm: int) -> float:
        return self.reward_sum[arm] / self.pull_count[arm]

    def record(self, arm: int, reward: int) -> None:
        self.pull_count[arm] += 1
        self.reward_sum[arm] += reward


def sample_reward(arm: int, arm_set: ArmSet, rng: np.random.Generator) -> int:
    if not 0 <= arm < arm_set.K:
        raise ConfigError(f"arm index {arm} out of range for K={arm_set.K}")
    # same rule as the compiled kernels: reward = [u < mu]
    return int(rng.random() < arm_set.means[arm])


def ucb_index(stats: ArmStats, arm: int, t: int, alpha: float) -> float:
    """UCB(alpha) index of ``arm`` for the pull at time ``t`` (t >= 1).

    Unpulled arms get ``+inf``. The arithmetic order matches the kernels so
    that both paths produce bit-identical indices.
    """
    pulls = int(stats.pull_count[arm])
    if pulls == 0:
        return math.inf
    return stats.reward_sum[arm] / pulls + math.sqrt(alpha * math.log(t) / pulls)


def select_arm(stats: ArmStats, active_set, t: int, alpha: float) -> int:
    """Arm of ``active_set`` with the largest index; ties go to the lowest arm."""
    best, best_val = -1, -math.inf
    for arm in sorted(int(a) for a in active_set):
        val = ucb_index(stats, arm, t, alpha)
        if best < 0 or val > best_val:
            best, best_val = arm, val
    if best < 0:
        raise ProtocolError("select_arm called with an empty active set")
    return best


def generate_synthetic_means(K: int, rng: np.random.Generator) -> ArmSet:
    """Best arm 0.95, second 0.85, the rest uniform on [0, 0.85]."""
    if K < 2:
        raise ConfigError("synthetic arm set needs K >= 2")
    rest = rng.uniform(0.0, 0.85, size=K - 2)
    return ArmSet.from_means(np.concatenate(([0.95, 0.85], rest)))


def load_means_file(path) -> ArmSet:
    """Read one probability in (0, 1) per line; blank lines and '#' comments are skipped."""
    path = Path(path)
    values = []
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read means file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        try:
            value = float(stripped)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: not a number: {stripped!r}") from None
        if not 0.0 < value < 1.0:
            raise ConfigError(f"{path}:{lineno}: mean {value!r} outside (0, 1)")
        values.append((value, lineno))
    if len(values) < 2:
        raise ConfigError(f"{path}: need at least two arm means")
    ranked = sorted(values, key=lambda v: -v[0])
    if ranked[0][0] == ranked[1][0]:
        raise ConfigError(
            f"{path}:{ranked[1][1]}: best arm is not unique (ties line {ranked[0][1]} at {ranked[0][0]!r})"
        )
    return ArmSet.from_means([v for v, _ in values])
