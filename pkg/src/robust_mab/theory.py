"""Closed-form regret bounds for overlay and parameter sanity checks.

Gaps are passed for the suboptimal arms only (arm 2 .. K in 1-based terms),
non-decreasing; gaps beyond K are taken to be 1. Logarithms are natural;
``log_eta(x)`` is ``ln(x) / ln(eta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class InvalidParameters(ValueError):
    """Inputs violate the hypotheses a bound was derived under."""


def theorem2_alpha_threshold(beta: float, eta: float) -> float:
    return (3 + (1 + beta * eta) / beta) / 2


@dataclass(frozen=True)
class BoundInputs:
    T: float
    alpha: float
    beta: float
    eta: float
    n: int
    m: int
    K: int
    S: int
    gaps: tuple  # suboptimal gaps, length K - 1

    @classmethod
    def from_config(cls, config, gaps: Sequence[float], T: float | None = None) -> "BoundInputs":
        return cls(
            T=config.T if T is None else T,
            alpha=config.alpha,
            beta=config.beta,
            eta=config.eta,
            n=config.n,
            m=config.m,
            K=len(gaps) + 1,
            S=config.sticky_size,
            gaps=tuple(float(g) for g in gaps),
        )

    def gap(self, k: int) -> float:
        """1-based gap of arm k (k >= 2); arms past K have gap 1."""
        return self.gaps[k - 2] if k <= self.K else 1.0

    def validate(self) -> None:
        problems = []
        if not self.beta > 1:
            problems.append(f"beta={self.beta} must exceed 1")
        if not self.eta > 1:
            problems.append(f"eta={self.eta} must exceed 1")
        if self.beta > 1 and self.eta > 1 and not self.alpha > theorem2_alpha_threshold(self.beta, self.eta):
            problems.append(
                f"alpha={self.alpha} must exceed {theorem2_alpha_threshold(self.beta, self.eta):g}"
            )
        if len(self.gaps) != self.K - 1:
            problems.append(f"expected {self.K - 1} gaps, got {len(self.gaps)}")
        if any(not g > 0 for g in self.gaps):
            problems.append("gaps must be positive")
        if any(b < a for a, b in zip(self.gaps, self.gaps[1:])):
            problems.append("gaps must be non-decreasing")
        if self.T < 1:
            problems.append("T must be >= 1")
        if problems:
            raise InvalidParameters("; ".join(problems))


def theorem2_log_coefficient(inputs: BoundInputs) -> float:
    """Coefficient of ln T in the upper bound: 4 alpha min{robust branch, all-arms branch}."""
    eta = inputs.eta
    m, S, K = inputs.m, inputs.S, inputs.K
    robust = (2 * eta - 1) / (eta - 1) * sum(1 / inputs.gap(k) for k in range(2, m + 4))
    robust += sum(1 / inputs.gap(k) for k in range(m + 4, S + m + 5))
    all_arms = sum(1 / inputs.gap(k) for k in range(2, K + 1))
    return 4 * inputs.alpha * min(robust, all_arms)


def _pow(base: float, exponent: float) -> float:
    try:
        return math.pow(base, exponent)
    except OverflowError:
        return math.inf


def additive_constant(inputs: BoundInputs) -> float:
    """The T-independent constant C* of the upper bound, summed term by term."""
    inputs.validate()
    a, b, e = inputs.alpha, inputs.beta, inputs.eta
    n, m, K, S = inputs.n, inputs.m, inputs.K, inputs.S
    d2 = inputs.gap(2)

    early = _pow(2.0, 1 + b * e) * _pow(
        4 + _pow(26 * a * (S + 2) / ((b - 1) * d2 ** 2), 2 / (b - 1)), b * e
    )
    x = b * (2 * a - 3)
    pairs = _pow(2.0, x + 1) * n * math.comb(K, 2) * (S + 1) / (
        (2 * a - 3) * (x - 1) * ((x - 1) / e - b)
    )
    spread = 10 * b / (b - 1) * _pow(
        max(6 * (m + n) * max(math.log(n), 2 * (b - 1)), 3 * (_pow(6.0, e) + 2)), b
    )
    tail = 4 * K * (a - 1) / (2 * a - 3)
    late = 8 * a * b * (K + math.log(K / d2) / math.log(e) * (m + 2)) / d2
    return early + pairs + spread + tail + late


def theorem2_upper_bound(inputs: BoundInputs) -> float:
    """Upper bound on one honest agent's expected regret at horizon T under blocking."""
    inputs.validate()
    return theorem2_log_coefficient(inputs) * math.log(inputs.T) + additive_constant(inputs)


def theorem1_lower_coefficient(alpha: float, gaps: Sequence[float]) -> float:
    """alpha (1 - 1/sqrt(alpha))^2 sum 1/gap: ln T coefficient of the no-blocking lower bound."""
    if not alpha > 1:
        raise InvalidParameters(f"alpha={alpha} must exceed 1")
    if any(not g > 0 for g in gaps):
        raise InvalidParameters("gaps must be positive")
    return alpha * (1 - 1 / math.sqrt(alpha)) ** 2 * sum(1 / g for g in gaps)


@dataclass(frozen=True)
class ParameterReport:
    beta_ok: bool
    eta_ok: bool
    alpha_threshold: float
    alpha_ok: bool
    theorem1_holds: bool
    theorem2_holds: bool

    def lines(self) -> list[str]:
        mark = {True: "ok", False: "FAILS"}
        return [
            f"beta > 1: {mark[self.beta_ok]}",
            f"eta > 1: {mark[self.eta_ok]}",
            f"alpha > {self.alpha_threshold:g}: {mark[self.alpha_ok]}",
            f"lower-bound hypotheses (alpha, beta > 1): {mark[self.theorem1_holds]}",
            f"upper-bound hypotheses: {mark[self.theorem2_holds]}",
        ]


def check_parameters(config) -> ParameterReport:
    """Report which hypotheses of the two regret theorems a configuration satisfies."""
    beta_ok = config.beta > 1
    eta_ok = config.eta > 1
    threshold = theorem2_alpha_threshold(config.beta, config.eta)
    alpha_ok = config.alpha > threshold
    return ParameterReport(
        beta_ok=beta_ok,
        eta_ok=eta_ok,
        alpha_threshold=threshold,
        alpha_ok=alpha_ok,
        theorem1_holds=config.alpha > 1 and beta_ok,
        theorem2_holds=beta_ok and eta_ok and alpha_ok,
    )
