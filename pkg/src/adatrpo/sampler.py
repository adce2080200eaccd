"""The nu-restart interaction model, truncated rollouts and batch estimates of q.

Randomness is counter-based. Trajectory ``m`` of iteration ``k`` reads row
``m % CHUNK`` of a uniform block drawn from a Philox stream keyed by
``(seed, k, m // CHUNK)``, so a batch is identical for any worker count or
scheduling order.

Uniform layout of one row (``T`` = horizon, ``R = 1 + 3T``)::

    u[0]                      start state from nu
    u[1+3i], u[2+3i], u[3+3i] restart walk step i: stop coin, action, next state
    u[R]                      uniform first action a_m
    u[R+2t+1], u[R+2t+2]      rollout step t: next state, next action
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from . import kernels
from .geometry import Regularizer, bregman, omega, omega_grad
from .mdp import Mdp, check_distribution, policy_value

CHUNK = 256
LOG_DTYPE = np.dtype([("k", "<u4"), ("m", "<u4"), ("s", "<u4"), ("a", "<u4"),
                      ("est", "<f8")])


def chunk_uniforms(seed: int, k: int, chunk: int, n_rows: int, width: int) -> np.ndarray:
    ss = np.random.SeedSequence([int(seed), int(k), int(chunk)])
    return np.random.Generator(np.random.Philox(ss)).random((n_rows, width))


class RestartModel:
    """Environment access through restarts from ``nu`` and single transitions.

    ``reset`` and ``step`` are the interactive interface. Batched simulation
    goes through ``simulate``; the learner never touches the transition or
    cost tables directly. ``evaluate`` is a diagnostic oracle for experiments.
    """

    def __init__(self, mdp: Mdp, nu, seed: int = 0):
        self._mdp = mdp
        self.nu = check_distribution(nu, mdp.n_states, "nu")
        self.seed = int(seed)
        self.n_states = mdp.n_states
        self.n_actions = mdp.n_actions
        self.gamma = mdp.gamma
        self.c_max = mdp.c_max
        self._rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed])))
        self._nu_cdf = kernels.sampling_cdf(self.nu)
        self._p_cdf = kernels.sampling_cdf(mdp.transition)
        self._cost = np.ascontiguousarray(mdp.cost, dtype=np.float64)

    def clone(self, seed: int | None = None) -> "RestartModel":
        return RestartModel(self._mdp, self.nu, self.seed if seed is None else seed)

    def reset(self) -> int:
        return int(np.argmax(self._rng.random() < self._nu_cdf))

    def step(self, s: int, a: int) -> tuple[int, float]:
        """Sample ``s' ~ P(.|s, a)``; returns ``(s', c(s, a))``."""
        nxt = int(np.argmax(self._rng.random() < self._p_cdf[s, a]))
        return nxt, float(self._cost[s, a])

    def next_uniforms(self, n_rows: int, width: int) -> np.ndarray:
        return self._rng.random((n_rows, width))

    def simulate(self, u, policy, reg: Regularizer, horizon: int, start_s: int = -1,
                 start_a: int = -1):
        """Run the kernel on a uniform block; returns ``(s_m, a_m, estimates)``."""
        pi_cdf = kernels.sampling_cdf(policy)
        reg_cost = _reg_cost(policy, reg)
        return kernels.simulate_trajectories(
            np.ascontiguousarray(u, dtype=np.float64), self._nu_cdf, pi_cdf, self._p_cdf,
            self._cost, reg_cost, float(self.gamma), int(horizon), int(start_s), int(start_a))

    def evaluate(self, policy, reg: Regularizer) -> np.ndarray:
        """Exact ``v^pi``; diagnostic access for evaluation, not for learning."""
        return policy_value(self._mdp, policy, reg)

    @property
    def diagnostic_mdp(self) -> Mdp:
        return self._mdp


def _reg_cost(policy, reg: Regularizer) -> np.ndarray:
    S = np.asarray(policy).shape[0]
    if not reg.lam:
        return np.zeros(S)
    return np.ascontiguousarray(reg.lam * np.asarray(omega(reg, policy)), dtype=np.float64)


def _check_horizon(horizon: int):
    if int(horizon) < 1:
        raise ValueError("horizon must be >= 1")


def sample_restart_state(model: RestartModel, policy, horizon: int) -> int:
    """One draw from the truncated discounted state distribution of ``policy``."""
    _check_horizon(horizon)
    u = model.next_uniforms(1, kernels.uniform_width(horizon))
    s, _, _ = model.simulate(u, policy, Regularizer("euclidean"), horizon)
    return int(s[0])


def truncated_rollout_q(model: RestartModel, policy, reg: Regularizer, s: int, a: int,
                        horizon: int) -> float:
    """``sum_{t<T} gamma^t (c(s_t, a_t) + lam * omega_{s_t}(pi))`` from ``(s, a)``."""
    _check_horizon(horizon)
    u = model.next_uniforms(1, kernels.uniform_width(horizon))
    _, _, est = model.simulate(u, policy, reg, horizon, start_s=s, start_a=a)
    return float(est[0])


def _chunk_bounds(m: int):
    return [(c, c * CHUNK, min(m, (c + 1) * CHUNK)) for c in range(-(-m // CHUNK))]


def simulate_batch(model: RestartModel, policy, reg: Regularizer, m: int, horizon: int,
                   k: int = 0, seed: int | None = None, workers: int = 1,
                   start_s: int = -1, start_a: int = -1):
    """``m`` counter-keyed trajectories; returns ``(s_m, a_m, estimates)`` in ``m`` order."""
    _check_horizon(horizon)
    seed = model.seed if seed is None else seed
    width = kernels.uniform_width(horizon)
    pi_cdf = kernels.sampling_cdf(policy)
    reg_cost = _reg_cost(policy, reg)

    def run(bounds):
        c, lo, hi = bounds
        u = chunk_uniforms(seed, k, c, hi - lo, width)
        return kernels.simulate_trajectories(
            u, model._nu_cdf, pi_cdf, model._p_cdf, model._cost, reg_cost,
            float(model.gamma), int(horizon), int(start_s), int(start_a))

    chunks = _chunk_bounds(m)
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(b) for b in chunks]
    if not parts:
        return (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.empty(0))
    return tuple(np.concatenate(p) for p in zip(*parts))


@dataclass
class TrajectoryBatch:
    visited: np.ndarray
    counts: np.ndarray
    q_hat: np.ndarray
    m_used: int
    horizon: int
    states: np.ndarray
    actions: np.ndarray
    estimates: np.ndarray

    def visited_set(self) -> set[int]:
        return set(int(s) for s in self.visited)


def batch_estimate(states, actions, estimates, n_states: int, n_actions: int):
    """``q_hat(s, a) = A * sum(estimates at (s, a)) / n(s)``; zero where ``n(s, a) = 0``."""
    counts = np.zeros((n_states, n_actions), dtype=np.int64)
    sums = np.zeros((n_states, n_actions))
    np.add.at(counts, (states, actions), 1)
    np.add.at(sums, (states, actions), estimates)
    n_s = counts.sum(axis=1)
    q_hat = np.zeros((n_states, n_actions))
    seen = n_s > 0
    q_hat[seen] = n_actions * sums[seen] / n_s[seen, None]
    return counts, q_hat, np.flatnonzero(seen)


def write_trajectory_log(fh: BinaryIO, k: int, states, actions, estimates):
    """Append 24-byte records ``<u4 k, <u4 m, <u4 s_m, <u4 a_m, <f8 estimate``."""
    rec = np.empty(len(states), dtype=LOG_DTYPE)
    rec["k"] = k
    rec["m"] = np.arange(len(states))
    rec["s"] = states
    rec["a"] = actions
    rec["est"] = estimates
    fh.write(rec.tobytes())


def read_trajectory_log(path) -> np.ndarray:
    return np.fromfile(path, dtype=LOG_DTYPE)


def collect_batch(model: RestartModel, policy, reg: Regularizer, m_trajectories: int,
                  horizon: int, k: int = 0, workers: int = 1,
                  log: BinaryIO | None = None) -> TrajectoryBatch:
    if m_trajectories < 1:
        raise ValueError("need at least one trajectory")
    states, actions, est = simulate_batch(model, policy, reg, m_trajectories, horizon, k,
                                          workers=workers)
    counts, q_hat, visited = batch_estimate(states, actions, est, model.n_states,
                                            model.n_actions)
    if log is not None:
        write_trajectory_log(log, k, states, actions, est)
    return TrajectoryBatch(visited, counts, q_hat, int(m_trajectories), int(horizon),
                           states, actions, est)


def batch_proximal_objective(batch: TrajectoryBatch, pi_k, candidate, reg: Regularizer,
                             t_k: float, gamma: float) -> float:
    """Batch average of the per-trajectory proximal objective at ``candidate``.

    Trajectory ``m`` contributes ``<g_m, pi(s_m) - pi_k(s_m)> + B(pi(s_m), pi_k(s_m)) / t``
    scaled by ``1 / (1 - gamma)``, where ``g_m = A * estimate_m * e_{a_m} + lam * grad omega``.
    """
    pi_k = np.asarray(pi_k, dtype=float)
    candidate = np.asarray(candidate, dtype=float)
    s, a = batch.states, batch.actions
    A = pi_k.shape[1]
    diff = candidate[s] - pi_k[s]
    lin = A * batch.estimates * diff[np.arange(s.size), a]
    if reg.lam:
        lin = lin + reg.lam * np.sum(omega_grad(reg, pi_k[s]) * diff, axis=1)
    prox = np.asarray(bregman(reg, candidate[s], pi_k[s])) / t_k
    return float(np.mean(lin + prox) / (1.0 - gamma))
