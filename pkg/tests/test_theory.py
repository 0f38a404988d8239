import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from robust_mab.engine import SimConfig
from robust_mab.theory import (
    BoundInputs,
    InvalidParameters,
    additive_constant,
    check_parameters,
    theorem1_lower_coefficient,
    theorem2_alpha_threshold,
    theorem2_log_coefficient,
    theorem2_upper_bound,
)


def inputs(K=20, m=2, S=3, n=5, gaps=None, alpha=4.0, beta=2.0, eta=2.0, T=1e5):
    gaps = tuple(gaps) if gaps is not None else tuple([0.1] * (K - 1))
    return BoundInputs(T=T, alpha=alpha, beta=beta, eta=eta, n=n, m=m, K=len(gaps) + 1, S=S, gaps=gaps)


class TestLogCoefficient:
    def test_all_arms_branch(self):
        # m >= K with equal gaps: the all-arms sum is smaller
        b = inputs(K=10, m=12, S=2, gaps=[0.2] * 9)
        assert theorem2_log_coefficient(b) == pytest.approx(4 * 4.0 * 9 / 0.2)

    @pytest.mark.parametrize("eta", [1.5, 2.0, 3.0])
    def test_unit_gaps_robust_branch(self, eta):
        # m = 0, S = 1: first sum has arms 2..3, second has arms 4..5
        b = inputs(K=500, m=0, S=1, gaps=[1.0] * 499, eta=eta)
        expected = 4 * 4.0 * ((2 * eta - 1) / (eta - 1) * 2 + 2)
        assert theorem2_log_coefficient(b) == pytest.approx(expected)

    def test_gaps_past_K_are_one(self):
        b = inputs(K=3, m=1, S=1, gaps=[0.5, 0.5])
        robust = 3 * (1 / 0.5 + 1 / 0.5 + 1 + 0) + 1 + 1
        all_arms = 4.0
        assert theorem2_log_coefficient(b) == pytest.approx(16 * min(robust, all_arms))

    @given(m=st.integers(0, 20), S=st.integers(1, 10), eta=st.floats(1.05, 5))
    def test_never_exceeds_all_arms(self, m, S, eta):
        b = inputs(K=40, m=m, S=S, eta=eta)
        assert theorem2_log_coefficient(b) <= 4 * 4.0 * 39 / 0.1 + 1e-9


class TestAdditiveConstant:
    def test_matches_transcription(self):
        a, b_, e, n, m, K, S, d2 = 6.0, 2.0, 1.5, 5, 2, 10, 2, 0.2
        gaps = [d2] + [0.3] * (K - 2)
        c = additive_constant(inputs(K=K, m=m, S=S, n=n, gaps=gaps, alpha=a, beta=b_, eta=e))
        x = b_ * (2 * a - 3)
        expected = (
            2 ** (1 + b_ * e) * (4 + (26 * a * (S + 2) / ((b_ - 1) * d2 ** 2)) ** (2 / (b_ - 1))) ** (b_ * e)
            + 2 ** (x + 1) * n * (K * (K - 1) / 2) * (S + 1) / ((2 * a - 3) * (x - 1) * ((x - 1) / e - b_))
            + 10 * b_ / (b_ - 1) * max(6 * (m + n) * max(math.log(n), 2 * (b_ - 1)), 3 * (6 ** e + 2)) ** b_
            + 4 * K * (a - 1) / (2 * a - 3)
            + 8 * a * b_ * (K + math.log(K / d2) / math.log(e) * (m + 2)) / d2
        )
        assert c == pytest.approx(expected, rel=1e-12)

    def test_overflow_is_infinite(self):
        b = inputs(K=100, m=10, S=4, n=25, gaps=[0.1] + [0.5] * 98, beta=1.05)
        assert additive_constant(b) == math.inf


class TestUpperBound:
    def test_paper_configuration_finite(self):
        b = inputs(K=100, m=10, S=4, n=25, gaps=[0.1] + [0.5] * 98)
        value = theorem2_upper_bound(b)
        assert math.isfinite(value) and value > 0

    def test_decomposition(self):
        # the constant dwarfs the log term, so check the sum rather than growth in T
        b = inputs(T=1e6)
        expected = theorem2_log_coefficient(b) * math.log(1e6) + additive_constant(b)
        assert theorem2_upper_bound(b) == expected

    @pytest.mark.parametrize("kwargs", [dict(alpha=2.7), dict(beta=1.0), dict(eta=1.0), dict(gaps=[0.2, 0.1])])
    def test_invalid(self, kwargs):
        with pytest.raises(InvalidParameters):
            theorem2_upper_bound(inputs(**kwargs))

    def test_from_config(self):
        cfg = SimConfig(n=25, m=10, K=100, T=100_000)
        b = BoundInputs.from_config(cfg, [0.1] * 99)
        assert (b.S, b.K, b.T) == (4, 100, 100_000)


class TestLowerCoefficient:
    def test_alpha_four(self):
        gaps = [0.1, 0.2, 0.5]
        assert theorem1_lower_coefficient(4.0, gaps) == pytest.approx(sum(1 / g for g in gaps))

    def test_single_arm(self):
        assert theorem1_lower_coefficient(4.0, [0.1]) == pytest.approx(10.0)

    def test_alpha_to_one(self):
        assert theorem1_lower_coefficient(1 + 1e-9, [0.1]) < 1e-8

    def test_alpha_at_most_one(self):
        with pytest.raises(InvalidParameters):
            theorem1_lower_coefficient(1.0, [0.1])

    @given(a=st.floats(1.01, 50), b=st.floats(1.01, 50))
    def test_increasing_in_alpha(self, a, b):
        lo, hi = sorted((a, b))
        assert theorem1_lower_coefficient(lo, [0.3]) <= theorem1_lower_coefficient(hi, [0.3]) + 1e-12


class TestCheckParameters:
    def test_default_threshold(self):
        assert theorem2_alpha_threshold(2, 2) == 2.75
        r = check_parameters(SimConfig(n=2, m=0, K=5, T=10))
        assert r.alpha_ok and r.theorem2_holds and r.theorem1_holds

    def test_beta_one(self):
        r = check_parameters(SimConfig(n=2, m=0, K=5, T=10, beta=1.0))
        assert not r.theorem1_holds and not r.theorem2_holds

    def test_eta_one(self):
        r = check_parameters(SimConfig(n=2, m=0, K=5, T=10, eta=1.0))
        assert r.theorem1_holds and not r.theorem2_holds

    def test_lines(self):
        assert any("FAILS" in line for line in check_parameters(SimConfig(n=2, m=0, K=5, T=10, alpha=2)).lines())
