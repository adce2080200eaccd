"""Numpy fallback for the restart-and-rollout kernel, vectorized over trajectories.

Bit-identical to the compiled kernel: every arithmetic step below is done
in the same order on the same float64 values.
"""
from __future__ import annotations

import numpy as np


def _draw(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    # first index with u < cdf; the +inf tail guarantees a hit
    return np.argmax(u[:, None] < cdf_rows, axis=1)


def simulate_trajectories(u, nu_cdf, pi_cdf, p_cdf, cost, reg_cost, gamma: float,
                          horizon: int, start_s: int = -1, start_a: int = -1):
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[0]
    n_actions = cost.shape[1]
    r = 1 + 3 * horizon
    if u.shape[1] < 1 + 5 * horizon:
        raise ValueError("uniform block too narrow for the horizon")
    rows = np.arange(n)

    if start_s >= 0:
        s = np.full(n, start_s, dtype=np.int64)
    else:
        s = _draw(np.broadcast_to(nu_cdf, (n, nu_cdf.size)), u[:, 0])
        active = np.ones(n, dtype=bool)
        stop = 1.0 - gamma
        for i in range(horizon):
            active &= ~(u[:, 1 + 3 * i] < stop)
            if not active.any():
                break
            idx = np.flatnonzero(active)
            a = _draw(pi_cdf[s[idx]], u[idx, 2 + 3 * i])
            s[idx] = _draw(p_cdf[s[idx], a], u[idx, 3 + 3 * i])
    s = s.astype(np.int64)
    s_m = s.copy()
    if start_a >= 0:
        a = np.full(n, start_a, dtype=np.int64)
    else:
        a = np.minimum((u[:, r] * n_actions).astype(np.int64), n_actions - 1)
    a_m = a.copy()

    est = np.zeros(n)
    disc = 1.0
    for t in range(horizon):
        est = est + disc * (cost[s, a] + reg_cost[s])
        disc = disc * gamma
        if t + 1 < horizon:
            s = _draw(p_cdf[s, a], u[rows, r + 2 * t + 1])
            a = _draw(pi_cdf[s], u[rows, r + 2 * t + 2])
    return s_m, a_m.astype(np.int64), est
