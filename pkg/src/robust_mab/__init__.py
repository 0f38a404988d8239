"""Robust multi-agent stochastic bandits with gossip recommendations and blocking."""

from .adversary import Observation, available_strategies, get_strategy, register_strategy
from .bandit import ArmSet, ArmStats, ConfigError, ProtocolError, select_arm, ucb_index
from .engine import EventLog, RunResult, SimConfig, TrialResult, run_trial, run_trials, verify_event_log

__all__ = [
    "ArmSet",
    "ArmStats",
    "ConfigError",
    "EventLog",
    "Observation",
    "ProtocolError",
    "RunResult",
    "SimConfig",
    "TrialResult",
    "available_strategies",
    "get_strategy",
    "register_strategy",
    "run_trial",
    "run_trials",
    "select_arm",
    "ucb_index",
    "verify_event_log",
]
