"""Recommendation strategies for malicious agents.

A strategy is a callable ``fn(phase, target, obs, rng) -> arm``. Built-ins are
``uniform`` and ``omniscient``; ``honest-mimic`` is special-cased by the engine,
which gives each mimic a full honest-agent state and uses its election result.

Custom strategies register under a name so the CLI can select them::

    @register_strategy("always-last")
    def always_last(phase, target, obs, rng):
        return obs.K - 1
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bandit import ConfigError

HONEST_MIMIC = "honest-mimic"


@dataclass(frozen=True)
class Observation:
    """Read-only snapshot of the asking agent, taken at the epoch before delivery."""

    target_agent: int
    phase: int
    target_active_set: frozenset
    target_pull_counts: np.ndarray
    K: int


StrategyFn = Callable[[int, int, Observation, np.random.Generator], int]

_REGISTRY: dict[str, StrategyFn] = {}


def register_strategy(name: str):
    if name == HONEST_MIMIC:
        raise ValueError(f"{HONEST_MIMIC!r} is reserved")

    def decorator(fn: StrategyFn) -> StrategyFn:
        _REGISTRY[name] = fn
        return fn

    return decorator


def get_strategy(name: str) -> StrategyFn:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown strategy {name!r}; known: {', '.join(available_strategies())}") from None


def available_strategies() -> list[str]:
    return sorted([*_REGISTRY, HONEST_MIMIC])


def recommend_uniform(K: int, rng: np.random.Generator) -> int:
    return int(rng.integers(K))


def recommend_omniscient(obs: Observation, K: int) -> int:
    """Least-played suboptimal arm outside the target's active set.

    Falls back to the least-played suboptimal arm when every suboptimal arm
    is active. Ties go to the lowest arm.
    """
    if K < 2:
        raise ConfigError("omniscient strategy needs K >= 2")
    counts = obs.target_pull_counts
    candidates = [k for k in range(1, K) if k not in obs.target_active_set]
    if not candidates:
        candidates = list(range(1, K))
    return min(candidates, key=lambda k: (counts[k], k))


@register_strategy("uniform")
def _uniform(phase, target, obs, rng):
    return recommend_uniform(obs.K, rng)


@register_strategy("omniscient")
def _omniscient(phase, target, obs, rng):
    return recommend_omniscient(obs, obs.K)


def recommend_honest_mimic(state) -> int:
    """A mimic recommends its own most-played arm of the current phase."""
    return int(state.most_played)
