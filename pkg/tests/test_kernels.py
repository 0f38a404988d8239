import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_mab import _kernels
from robust_mab.bandit import ArmStats, select_arm


def random_phase(seed, n_agents=4, K=9, width=4, t_start=1, length=60):
    rng = np.random.default_rng(seed)
    means = rng.uniform(0, 1, K)
    counts = rng.integers(0, 5, (n_agents, K)).astype(np.int64) if t_start > 1 else np.zeros((n_agents, K), np.int64)
    sums = (counts * rng.uniform(0, 1, (n_agents, K))).astype(np.int64)
    active = np.sort(np.stack([rng.choice(K, width, replace=False) for _ in range(n_agents)]), axis=1)
    uniforms = rng.random((n_agents, length))
    t_end = t_start + length - 1
    ck_times = np.unique(rng.integers(1, t_end + 5, 8)).astype(np.int64)
    ck_counts = np.zeros((n_agents, ck_times.size, K), np.int64)
    return [means, counts, sums, active, t_start, t_end, 4.0, uniforms, ck_times, ck_counts]


def run(kernel, args):
    args = [a.copy() if isinstance(a, np.ndarray) else a for a in args]
    kernel(*args)
    return args[1], args[2], args[9]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), t_start=st.integers(1, 500), width=st.integers(1, 6))
def test_numba_and_numpy_agree(seed, t_start, width):
    args = random_phase(seed, width=width, t_start=t_start)
    a = run(_kernels._play_phase_numba, args)
    b = run(_kernels._play_phase_numpy, args)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_kernel_matches_scalar_select_arm():
    means, counts, sums, active, t_start, t_end, alpha, uniforms, ck_times, ck_counts = random_phase(3, t_start=40)
    ref_counts, ref_sums = counts.copy(), sums.copy()
    for a in range(active.shape[0]):
        stats = ArmStats(ref_counts[a], ref_sums[a])
        for t in range(t_start, t_end + 1):
            arm = select_arm(stats, active[a], t, alpha)
            stats.record(arm, int(uniforms[a, t - t_start] < means[arm]))
    got_counts, got_sums, _ = run(_kernels.play_phase, [means, counts, sums, active, t_start, t_end, alpha,
                                                      uniforms, ck_times, ck_counts])
    assert np.array_equal(got_counts, ref_counts)
    assert np.array_equal(got_sums, ref_sums)


def test_checkpoints_snapshot_counts():
    args = random_phase(5, t_start=1, length=30)
    args[8] = np.array([1, 10, 30], dtype=np.int64)
    args[9] = np.zeros((4, 3, 9), np.int64)
    _, _, ck = run(_kernels.play_phase, args)
    assert ck.sum(axis=2).tolist() == [[1, 10, 30]] * 4


SCRIPT = """
import json, numpy as np
from robust_mab import _kernels, run_trial, SimConfig
tr = run_trial(SimConfig(n=4, m=2, K=10, T=3000, variant="blocking"), 0)
print(json.dumps({"numba": _kernels.USE_NUMBA, "counts": tr.final_counts.tolist()}))
"""


@pytest.mark.parametrize("flag", ["1", "yes"])
def test_env_flag_selects_numpy_path(flag):
    def go(env_flag):
        env = dict(os.environ)
        env.pop("ROBUST_MAB_NO_NUMBA", None)
        if env_flag is not None:
            env["ROBUST_MAB_NO_NUMBA"] = env_flag
        out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
        return json.loads(out.stdout)

    fast, slow = go(None), go(flag)
    assert fast["numba"] is True and slow["numba"] is False
    assert fast["counts"] == slow["counts"]
