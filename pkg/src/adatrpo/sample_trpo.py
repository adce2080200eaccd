"""Sample-based TRPO driven by a nu-restart model."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Regularizer, RegularizerConstants
from .mdp import Mdp, check_distribution, discounted_stationary, optimal_value, uniform_policy
from .planners import GAP_FLOOR, InvariantViolation
from .sampler import RestartModel, collect_batch
from .updates import LogFloorCounter, ScheduleKind, default_schedule, policy_update, step_size


def required_trajectories(consts: RegularizerConstants, k: int, epsilon: float, delta: float,
                          n_states: int, variant: str = "appendix") -> int:
    """Trajectories needed at iteration ``k`` for accuracy ``epsilon`` w.p. ``1 - delta``.

    appendix: ``8 r(k)^2 / eps^2 * (S log 2A + log(pi^2 (k+1)^2 / (6 delta)))``
    main:     ``A^2 C_lam^2 (S log 2A + log 1/delta) / ((1 - gamma)^2 eps^2)``
    """
    if epsilon <= 0 or not 0 < delta < 1 or n_states < 1:
        raise ValueError("need epsilon > 0, 0 < delta < 1 and n_states >= 1")
    A = consts.n_actions
    if variant == "appendix":
        r = consts.r_omega(k)
        delta_k = 6.0 * delta / (math.pi ** 2 * (k + 1) ** 2)
        m = 8.0 * r * r / epsilon ** 2 * (n_states * math.log(2 * A) + math.log(1.0 / delta_k))
    elif variant == "main":
        m = (A * A * consts.c_max_lambda ** 2
             * (n_states * math.log(2 * A) + math.log(1.0 / delta))
             / ((1.0 - consts.gamma) ** 2 * epsilon ** 2))
    else:
        raise ValueError(f"unknown sample-count variant {variant!r}")
    return int(math.ceil(m))


def truncation_horizon(consts: RegularizerConstants, k: int, epsilon: float,
                       gamma: float | None = None) -> int:
    """``ceil(ln(8 r(k) / eps) / (1 - gamma))``, at least 1."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    gamma = consts.gamma if gamma is None else gamma
    ratio = 8.0 * consts.r_omega(k) / epsilon
    return max(1, int(math.ceil(math.log(ratio) / (1.0 - gamma))))


def concentrability(mdp: Mdp, mu, nu, pi_star) -> float:
    """``max_s d_{mu, pi*}(s) / nu(s)`` with ``0/0 = 0`` and ``x/0 = inf`` for ``x > 0``."""
    d = discounted_stationary(mdp, pi_star, mu)
    nu = np.asarray(nu, dtype=float)
    ratio = np.zeros_like(d)
    pos = nu > 0
    ratio[pos] = d[pos] / nu[pos]
    if np.any((~pos) & (d > 0)):
        return math.inf
    return float(ratio.max())


@dataclass
class LearnerConfig:
    epsilon: float
    delta: float
    n_iterations: int
    regularizer: Regularizer
    schedule: ScheduleKind | str | None = None
    fixed_step: float | None = None
    m_override: int | None = None
    horizon_override: int | None = None
    m_variant: str = "appendix"
    mu: np.ndarray | None = None
    workers: int = 1
    trajectory_log: str | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.n_iterations < 0:
            raise ValueError("n_iterations must be >= 0")
        if self.m_override is not None and self.m_override < 1:
            raise ValueError("m_override must be >= 1")
        if self.schedule is None:
            self.schedule = default_schedule(self.regularizer.lam)
        self.schedule = ScheduleKind.parse(self.schedule)


@dataclass
class LearnerRecord:
    k: int
    t_k: float
    m_k: int
    horizon: int
    mu_gap: float
    best_gap: float
    linf_gap: float
    n_visited: int


@dataclass
class LearnerReport:
    records: list[LearnerRecord]
    best_policy: np.ndarray
    policy: np.ndarray
    final_mu_gap: float
    final_best_gap: float
    log_floor_hits: int = 0
    best_k: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)


def sample_based_trpo(model: RestartModel, config: LearnerConfig) -> LearnerReport:
    """Iterate: collect a restart batch, update visited states, evaluate.

    Record ``k`` describes ``pi_k`` (its exact mu-gap and the best gap among
    ``pi_0 .. pi_k``) together with the step, batch size and horizon used to
    form ``pi_{k+1}``. The report's ``final_*`` fields cover ``pi_N`` as well.
    Evaluation goes through the model's diagnostic oracle.
    """
    reg = config.regularizer
    S, A = model.n_states, model.n_actions
    consts = RegularizerConstants.for_problem(reg, A, model.c_max, model.gamma)
    mu = model.nu if config.mu is None else check_distribution(config.mu, S, "mu")
    v_star, _ = optimal_value(model.diagnostic_mdp, reg)
    mu_star = float(mu @ v_star)

    pi = uniform_policy(S, A)
    best_pi, best_gap, best_k = pi.copy(), math.inf, 0
    records: list[LearnerRecord] = []
    floors = LogFloorCounter()
    log = open(config.trajectory_log, "wb") if config.trajectory_log else None
    try:
        for k in range(config.n_iterations):
            v = model.evaluate(pi, reg)
            gap = v - v_star
            if np.min(gap) < GAP_FLOOR:
                raise InvariantViolation(f"iteration {k}: value below the optimum")
            mu_gap = float(mu @ v) - mu_star
            if mu_gap < best_gap:
                best_pi, best_gap, best_k = pi.copy(), mu_gap, k

            t = step_size(config.schedule, k, consts, fixed=config.fixed_step).t_k
            m_k = config.m_override or required_trajectories(consts, k, config.epsilon,
                                                             config.delta, S, config.m_variant)
            horizon = config.horizon_override or truncation_horizon(consts, k, config.epsilon)
            batch = collect_batch(model, pi, reg, m_k, horizon, k=k, workers=config.workers,
                                  log=log)
            new_pi = pi.copy()
            vis = batch.visited
            if vis.size:
                new_pi[vis] = policy_update(reg.geometry, pi[vis], batch.q_hat[vis], t, reg.lam,
                                            floors)
            records.append(LearnerRecord(k, t, int(m_k), int(horizon), mu_gap, best_gap,
                                         float(np.max(np.abs(gap))), int(vis.size)))
            pi = new_pi
    finally:
        if log is not None:
            log.close()
    final_gap = float(mu @ model.evaluate(pi, reg)) - mu_star
    if final_gap < best_gap:
        best_pi, best_gap, best_k = pi.copy(), final_gap, config.n_iterations
    return LearnerReport(records, best_pi, pi, final_gap, best_gap, floors.count, best_k)
