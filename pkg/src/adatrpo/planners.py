"""Exact-model TRPO planners: Uniform TRPO and Exact TRPO."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Regularizer, RegularizerConstants, bregman, omega, omega_grad
from .mdp import (Mdp, check_distribution, discounted_stationary, optimal_value, policy_value,
                  q_function, uniform_policy)
from .updates import (LogFloorCounter, ScheduleKind, default_schedule, policy_update,
                      step_size)

IMPROVEMENT_SLACK = 1e-9
FUNDAMENTAL_SLACK = 1e-8
GAP_FLOOR = -1e-10


class InvariantViolation(AssertionError):
    """A per-iteration guarantee failed beyond its numerical slack."""


@dataclass
class PlannerConfig:
    n_iterations: int
    regularizer: Regularizer
    schedule: ScheduleKind | str | None = None
    fixed_step: float | None = None
    check_invariants: bool = False
    nu: np.ndarray | None = None
    mu: np.ndarray | None = None
    support_epsilon: float = 0.0
    keep_snapshots: bool = False
    reference_tol: float = 1e-12

    def __post_init__(self):
        if self.n_iterations < 0:
            raise ValueError("n_iterations must be >= 0")
        if self.schedule is None:
            self.schedule = default_schedule(self.regularizer.lam)
        self.schedule = ScheduleKind.parse(self.schedule)


@dataclass
class IterateRecord:
    k: int
    t_k: float
    linf_gap: float
    mu_gap: float | None
    improved: bool
    fi_residual: float | None = None


@dataclass
class PlannerResult:
    records: list[IterateRecord]
    policy: np.ndarray
    v_star: np.ndarray
    pi_star: np.ndarray
    snapshots: list[np.ndarray] = field(default_factory=list)
    log_floor_hits: int = 0

    @property
    def final_value(self) -> np.ndarray:
        return self._final_value

    def gaps(self, which: str = "linf_gap") -> np.ndarray:
        return np.array([getattr(r, which) for r in self.records], dtype=float)


def check_fundamental_inequality(mdp: Mdp, reg: Regularizer, pi_k, pi_k1, pi_ref, t_k: float,
                                 v_k=None) -> tuple[bool, float]:
    """Evaluate the per-step inequality linking ``pi_k``, ``pi_{k+1}`` and a comparator.

        t (I - gamma P^ref)(v^k - v^ref)
            <= (1 - lam t) B(ref, pi_k) - B(ref, pi_{k+1})
               + lam t (omega(pi_k) - omega(pi_{k+1})) + t^2 h_s^2 / (2 (1 - lam t))

    ``h_s`` is the dual norm (L2 euclidean, Linf entropy) of the unregularized
    part of ``q^k(s, .)``. Returns ``(holds, max violation)``.
    """
    lam = reg.lam
    gamma = mdp.gamma
    if v_k is None:
        v_k = policy_value(mdp, pi_k, reg)
    v_ref = policy_value(mdp, pi_ref, reg)
    P_ref = np.einsum("sa,sat->st", pi_ref, mdp.transition)
    lhs = t_k * (v_k - v_ref - gamma * P_ref @ (v_k - v_ref))

    x = mdp.cost + gamma * (mdp.transition @ v_k)
    if reg.is_entropy:
        h = np.max(np.abs(x), axis=1)
    else:
        h = np.sqrt(np.sum(x * x, axis=1))
    rhs = ((1.0 - lam * t_k) * bregman(reg, pi_ref, pi_k) - bregman(reg, pi_ref, pi_k1)
           + t_k * t_k * h * h / (2.0 * (1.0 - lam * t_k)))
    if lam:
        rhs = rhs + lam * t_k * (omega(reg, pi_k) - omega(reg, pi_k1))
    residual = float(np.max(lhs - rhs))
    return residual <= FUNDAMENTAL_SLACK, residual


def _run(mdp: Mdp, config: PlannerConfig, support_from: np.ndarray | None) -> PlannerResult:
    reg = config.regularizer
    consts = RegularizerConstants.for_problem(reg, mdp.n_actions, mdp.c_max, mdp.gamma)
    v_star, pi_star = optimal_value(mdp, reg, tol=config.reference_tol)
    mu = config.mu if config.mu is not None else support_from
    if mu is not None:
        mu = check_distribution(mu, mdp.n_states, "mu")

    pi = uniform_policy(mdp.n_states, mdp.n_actions)
    v = policy_value(mdp, pi, reg)
    records: list[IterateRecord] = []
    snapshots = [pi.copy()] if config.keep_snapshots else []
    floors = LogFloorCounter()

    for k in range(config.n_iterations):
        t = step_size(config.schedule, k, consts, fixed=config.fixed_step).t_k
        q = q_function(mdp, pi, reg, v)
        new_pi = policy_update(reg.geometry, pi, q, t, reg.lam, floors)
        if support_from is not None:
            d = discounted_stationary(mdp, pi, support_from)
            frozen = ~(d > config.support_epsilon)
            new_pi[frozen] = pi[frozen]
        new_v = policy_value(mdp, new_pi, reg)

        gap = v - v_star
        linf_gap = float(np.max(np.abs(gap)))
        if np.min(gap) < GAP_FLOOR:
            raise InvariantViolation(f"iteration {k}: value below the optimum by {-np.min(gap)}")
        mu_gap = float(mu @ gap) if mu is not None else None
        if support_from is None:
            improved = bool(np.all(new_v <= v + IMPROVEMENT_SLACK))
        else:
            improved = bool(mu @ new_v <= mu @ v + IMPROVEMENT_SLACK)

        fi_residual = None
        if config.check_invariants:
            if not improved:
                raise InvariantViolation(f"iteration {k}: value did not improve")
            if support_from is None:
                ok, fi_residual = check_fundamental_inequality(mdp, reg, pi, new_pi, pi_star,
                                                               t, v_k=v)
                if not ok:
                    raise InvariantViolation(
                        f"iteration {k}: fundamental inequality violated by {fi_residual}")
            if not reg.is_entropy or np.all(new_pi > 0):
                drift = np.max(np.abs(omega_grad(reg, new_pi) - omega_grad(reg, pi)))
                if drift > consts.grad_drift_bound(k, t) + 1e-12:
                    raise InvariantViolation(f"iteration {k}: omega-gradient drift {drift}")

        records.append(IterateRecord(k, t, linf_gap, mu_gap, improved, fi_residual))
        pi, v = new_pi, new_v
        if config.keep_snapshots:
            snapshots.append(pi.copy())

    result = PlannerResult(records, pi, v_star, pi_star, snapshots, floors.count)
    result._final_value = v
    return result


def uniform_trpo(mdp: Mdp, config: PlannerConfig) -> PlannerResult:
    """Uniform TRPO from the uniform policy; every state is updated each iteration.

    Record ``k`` holds the step ``t_k`` and the gaps of ``pi_k`` (before the update).
    """
    return _run(mdp, config, None)


def exact_trpo(mdp: Mdp, config: PlannerConfig) -> PlannerResult:
    """Exact TRPO: only states with ``d_{nu, pi_k}(s) > support_epsilon`` are updated.

    The scalar gap is weighted by ``config.mu`` when given, otherwise by ``nu``.
    """
    if config.nu is None:
        raise ValueError("exact TRPO needs a restart distribution nu")
    nu = check_distribution(config.nu, mdp.n_states, "nu")
    return _run(mdp, config, nu)
