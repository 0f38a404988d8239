"""Time the numba and numpy phase kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--agents 25] [--K 100] [--width 6] [--steps 20000]

Also times one full trial of the default configuration under each path by
re-running the engine in a subprocess with ROBUST_MAB_NO_NUMBA set.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from robust_mab import _kernels


def make_inputs(agents, K, width, steps, seed=0):
    rng = np.random.default_rng(seed)
    means = rng.uniform(0, 1, K)
    active = np.sort(np.stack([rng.choice(K, width, replace=False) for _ in range(agents)]), axis=1)
    uniforms = rng.random((agents, steps))
    ck_times = np.unique(np.geomspace(1, steps, 50).astype(np.int64))
    return means, active, uniforms, ck_times


def time_kernel(kernel, inputs, repeats):
    means, active, uniforms, ck_times = inputs
    agents, steps = uniforms.shape
    K = means.size
    best = float("inf")
    for _ in range(repeats):
        counts = np.zeros((agents, K), np.int64)
        sums = np.zeros((agents, K), np.int64)
        ck = np.zeros((agents, ck_times.size, K), np.int64)
        start = time.perf_counter()
        kernel(means, counts, sums, active, 1, steps, 4.0, uniforms, ck_times, ck)
        best = min(best, time.perf_counter() - start)
    return best, counts


TRIAL = """
import time
from robust_mab import SimConfig, run_trial
cfg = SimConfig(n=25, m=10, K=100, T={T}, record_events=False)
run_trial(SimConfig(n=2, m=0, K=4, T=10), 0)  # warm up compilation
start = time.perf_counter()
run_trial(cfg, 0)
print(time.perf_counter() - start)
"""


def time_trial(disable_numba, T):
    env = dict(os.environ)
    env.pop("ROBUST_MAB_NO_NUMBA", None)
    if disable_numba:
        env["ROBUST_MAB_NO_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", TRIAL.format(T=T)], env=env, check=True,
                         capture_output=True, text=True)
    return float(out.stdout.strip())


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--agents", type=int, default=25)
    parser.add_argument("--K", type=int, default=100)
    parser.add_argument("--width", type=int, default=6)
    parser.add_argument("--steps", type=int, default=20_000)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--trial-T", type=int, default=20_000, help="horizon for the full-trial timing (0 skips)")
    args = parser.parse_args()

    inputs = make_inputs(args.agents, args.K, args.width, args.steps)
    time_kernel(_kernels._play_phase_numba, make_inputs(2, 4, 2, 5), 1)  # compile
    t_numba, c_numba = time_kernel(_kernels._play_phase_numba, inputs, args.repeats)
    t_numpy, c_numpy = time_kernel(_kernels._play_phase_numpy, inputs, args.repeats)
    pulls = args.agents * args.steps
    print(f"kernel: {args.agents} agents x {args.steps} steps, active width {args.width}")
    print(f"  numba  {t_numba * 1e3:9.1f} ms  ({pulls / t_numba / 1e6:7.2f} M pulls/s)")
    print(f"  numpy  {t_numpy * 1e3:9.1f} ms  ({pulls / t_numpy / 1e6:7.2f} M pulls/s)")
    print(f"  speedup {t_numpy / t_numba:.1f}x, identical counts: {np.array_equal(c_numba, c_numpy)}")
    if args.trial_T > 0:
        fast = time_trial(False, args.trial_T)
        slow = time_trial(True, args.trial_T)
        print(f"full trial (n=25, m=10, K=100, T={args.trial_T}): numba {fast:.2f} s, numpy {slow:.2f} s, "
              f"speedup {slow / fast:.1f}x")


if __name__ == "__main__":
    main()
