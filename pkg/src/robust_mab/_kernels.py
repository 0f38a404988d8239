"""Hot loop: every agent plays UCB(alpha) on its active set through one phase.

Two implementations with the same signature and bit-identical results:

* ``_play_phase_numba``: nopython loop over agents, then time.
* ``_play_phase_numpy``: pure numpy, loops over time and vectorizes over agents.

``play_phase`` is the numba kernel unless numba is missing or the environment
variable ``ROBUST_MAB_NO_NUMBA`` is set to a non-empty value other than ``0``.

Arguments shared by both kernels::

    means      float64[K]      arm means
    counts     int64[A, K]     pull counts, updated in place
    sums       int64[A, K]     unit-reward counts, updated in place
    active     int64[A, W]     active arms per agent, sorted ascending
    t_start    first time step of the phase (>= 1)
    t_end      last time step of the phase
    alpha      UCB exploration parameter
    uniforms   float64[A, t_end - t_start + 1]; reward at step t is [u < mean]
    ck_times   int64[C]        sorted checkpoint times
    ck_counts  int64[A, C, K]  pull counts snapshot written at each checkpoint
"""

import math
import os

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f


def _numba_disabled() -> bool:
    flag = os.environ.get("ROBUST_MAB_NO_NUMBA", "")
    return flag not in ("", "0")


USE_NUMBA = NUMBA_AVAILABLE and not _numba_disabled()


@njit(cache=True)
def _play_phase_numba(means, counts, sums, active, t_start, t_end, alpha, uniforms, ck_times, ck_counts):
    n_agents, width = active.shape
    n_ck = ck_times.shape[0]
    c0 = np.searchsorted(ck_times, t_start)
    for a in range(n_agents):
        c = c0
        for t in range(t_start, t_end + 1):
            logt = math.log(t)
            best = active[a, 0]
            best_val = -np.inf
            for s in range(width):
                k = active[a, s]
                pulls = counts[a, k]
                if pulls == 0:
                    val = np.inf
                else:
                    val = sums[a, k] / pulls + math.sqrt(alpha * logt / pulls)
                if s == 0 or val > best_val:
                    best = k
                    best_val = val
            counts[a, best] += 1
            if uniforms[a, t - t_start] < means[best]:
                sums[a, best] += 1
            if c < n_ck and ck_times[c] == t:
                ck_counts[a, c, :] = counts[a, :]
                c += 1


def _play_phase_numpy(means, counts, sums, active, t_start, t_end, alpha, uniforms, ck_times, ck_counts):
    n_agents = active.shape[0]
    rows = np.arange(n_agents)
    gather = rows[:, None]
    c = int(np.searchsorted(ck_times, t_start))
    n_ck = ck_times.shape[0]
    for t in range(t_start, t_end + 1):
        logt = math.log(t)
        pulls = counts[gather, active]
        unpulled = pulls == 0
        safe = np.where(unpulled, 1, pulls).astype(np.float64)
        index = sums[gather, active] / safe + np.sqrt(alpha * logt / safe)
        index[unpulled] = np.inf
        arms = active[rows, np.argmax(index, axis=1)]
        counts[rows, arms] += 1
        sums[rows, arms] += uniforms[:, t - t_start] < means[arms]
        if c < n_ck and ck_times[c] == t:
            ck_counts[:, c, :] = counts
            c += 1


def play_phase(means, counts, sums, active, t_start, t_end, alpha, uniforms, ck_times, ck_counts):
    if USE_NUMBA:
        _play_phase_numba(means, counts, sums, active, t_start, t_end, alpha, uniforms, ck_times, ck_counts)
    else:
        _play_phase_numpy(means, counts, sums, active, t_start, t_end, alpha, uniforms, ck_times, ck_counts)
