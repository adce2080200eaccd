"""Finite discounted MDPs with cost-based, optionally regularized, Bellman machinery.

Conventions: ``transition[s, a, s']`` is ``P(s' | s, a)``, ``cost[s, a]`` lies in
``[0, c_max]`` and policies are row-stochastic ``(S, A)`` arrays. All linear
systems are solved with a dense LU factorization (``numpy.linalg.solve``).
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import (Geometry, GeometryDomainError, Regularizer, RegularizerConstants,
                       bregman, omega, project_simplex)

PROB_ATOL = 1e-12


class MdpValidationError(ValueError):
    """An MDP or distribution violates its invariants. ``path`` locates the offending entry."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ConvergenceError(RuntimeError):
    pass


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mdp:
    transition: np.ndarray
    cost: np.ndarray
    gamma: float
    c_max: float

    def __post_init__(self):
        object.__setattr__(self, "transition", _readonly(self.transition))
        object.__setattr__(self, "cost", _readonly(self.cost))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "c_max", float(self.c_max))
        self.validate()

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    def validate(self) -> None:
        P, C = self.transition, self.cost
        if P.ndim != 3 or P.shape[0] != P.shape[2] or P.shape[0] < 1 or P.shape[1] < 1:
            raise MdpValidationError(f"transition must have shape (S, A, S), got {P.shape}",
                                     "transition")
        if C.shape != P.shape[:2]:
            raise MdpValidationError(f"cost must have shape {P.shape[:2]}, got {C.shape}", "cost")
        if not (0.0 < self.gamma < 1.0):
            raise MdpValidationError(f"discount must lie in (0, 1), got {self.gamma}", "gamma")
        if not (self.c_max > 0.0 and math.isfinite(self.c_max)):
            raise MdpValidationError(f"c_max must be positive, got {self.c_max}", "c_max")
        if not np.all(np.isfinite(P)):
            raise MdpValidationError("non-finite probability", "transition")
        bad = np.argwhere(P < 0)
        if bad.size:
            s, a, t = bad[0]
            raise MdpValidationError(f"negative probability {P[s, a, t]}",
                                     f"transition[{s}][{a}][{t}]")
        sums = P.sum(axis=2)
        bad = np.argwhere(np.abs(sums - 1.0) > PROB_ATOL)
        if bad.size:
            s, a = bad[0]
            raise MdpValidationError(f"row sums to {sums[s, a]!r}, expected 1",
                                     f"transition[{s}][{a}]")
        bad = np.argwhere(~((C >= 0) & (C <= self.c_max)))
        if bad.size:
            s, a = bad[0]
            raise MdpValidationError(f"cost {C[s, a]} outside [0, {self.c_max}]",
                                     f"cost[{s}][{a}]")

    # ------------------------------------------------------------------ io
    def to_dict(self) -> dict:
        return {"n_states": self.n_states, "n_actions": self.n_actions, "gamma": self.gamma,
                "c_max": self.c_max, "cost": self.cost.tolist(),
                "transition": self.transition.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Mdp":
        for key in ("n_states", "n_actions", "gamma", "c_max", "cost", "transition"):
            if key not in data:
                raise MdpValidationError("missing field", key)
        S, A = data["n_states"], data["n_actions"]
        if not (isinstance(S, int) and isinstance(A, int) and S >= 1 and A >= 1):
            raise MdpValidationError("n_states and n_actions must be positive integers",
                                     "n_states")
        cost, trans = data["cost"], data["transition"]
        if len(cost) != S:
            raise MdpValidationError(f"expected {S} rows, got {len(cost)}", "cost")
        for s, row in enumerate(cost):
            if len(row) != A:
                raise MdpValidationError(f"expected {A} entries, got {len(row)}", f"cost[{s}]")
        if len(trans) != S:
            raise MdpValidationError(f"expected {S} rows, got {len(trans)}", "transition")
        for s, block in enumerate(trans):
            if len(block) != A:
                raise MdpValidationError(f"expected {A} rows, got {len(block)}",
                                         f"transition[{s}]")
            for a, row in enumerate(block):
                if len(row) != S:
                    raise MdpValidationError(f"expected {S} entries, got {len(row)}",
                                             f"transition[{s}][{a}]")
        return cls(np.array(trans, dtype=float), np.array(cost, dtype=float),
                   data["gamma"], data["c_max"])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "Mdp":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MdpValidationError(f"invalid JSON: {exc.msg}",
                                     f"{path}:line {exc.lineno}") from None
        try:
            return cls.from_dict(data)
        except MdpValidationError as exc:
            raise MdpValidationError(str(exc), f"{path}") from None


# ---------------------------------------------------------------- policies

def uniform_policy(n_states: int, n_actions: int) -> np.ndarray:
    return np.full((n_states, n_actions), 1.0 / n_actions)


def deterministic_policy(actions, n_actions: int) -> np.ndarray:
    actions = np.asarray(actions, dtype=int)
    pi = np.zeros((actions.size, n_actions))
    pi[np.arange(actions.size), actions] = 1.0
    return pi


def check_policy(policy, n_states: int, n_actions: int) -> np.ndarray:
    pi = np.asarray(policy, dtype=float)
    if pi.shape != (n_states, n_actions):
        raise MdpValidationError(f"policy must have shape {(n_states, n_actions)}, got {pi.shape}")
    if np.any(pi < 0) or np.any(np.abs(pi.sum(axis=1) - 1.0) > PROB_ATOL):
        raise MdpValidationError("policy rows must lie in the simplex")
    return pi


def check_distribution(d, n_states: int, name: str = "distribution") -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (n_states,) or np.any(d < 0) or abs(d.sum() - 1.0) > PROB_ATOL:
        raise MdpValidationError("must be a probability vector over states", name)
    return d


# ----------------------------------------------------------- evaluation

def policy_transition(mdp: Mdp, policy) -> np.ndarray:
    return np.einsum("sa,sat->st", policy, mdp.transition)


def regularized_cost(mdp: Mdp, policy, reg: Regularizer) -> np.ndarray:
    """State-wise shaped cost ``c^pi + lam * omega(pi)``."""
    c = np.sum(policy * mdp.cost, axis=1)
    if reg.lam:
        c = c + reg.lam * omega(reg, policy)
    return c


def policy_value(mdp: Mdp, policy, reg: Regularizer) -> np.ndarray:
    P_pi = policy_transition(mdp, policy)
    lhs = np.eye(mdp.n_states) - mdp.gamma * P_pi
    return np.linalg.solve(lhs, regularized_cost(mdp, policy, reg))


def q_function(mdp: Mdp, policy, reg: Regularizer, v) -> np.ndarray:
    q = mdp.cost + mdp.gamma * (mdp.transition @ np.asarray(v, dtype=float))
    if reg.lam:
        q = q + reg.lam * np.asarray(omega(reg, policy))[:, None]
    return q


def bellman_pi(mdp: Mdp, policy, reg: Regularizer, v) -> np.ndarray:
    return regularized_cost(mdp, policy, reg) + mdp.gamma * policy_transition(mdp, policy) @ v


def _soft_min(x: np.ndarray, reg: Regularizer) -> tuple[np.ndarray, np.ndarray]:
    """Per-row ``min_p <p, x> + lam * omega(p)`` and its minimizer."""
    A = x.shape[1]
    if reg.lam == 0.0:
        greedy = np.argmin(x, axis=1)  # ties: lowest action index
        return x[np.arange(x.shape[0]), greedy], deterministic_policy(greedy, A)
    if reg.is_entropy:
        z = -x / reg.lam
        zmax = z.max(axis=1, keepdims=True)
        w = np.exp(z - zmax)
        total = w.sum(axis=1)
        value = -reg.lam * (zmax[:, 0] + np.log(total / A))
        return value, w / total[:, None]
    p = project_simplex(-x / reg.lam)
    value = np.sum(p * x, axis=1) + reg.lam * 0.5 * np.sum(p * p, axis=1)
    return value, p


def bellman_opt(mdp: Mdp, reg: Regularizer, v) -> np.ndarray:
    x = mdp.cost + mdp.gamma * (mdp.transition @ np.asarray(v, dtype=float))
    return _soft_min(x, reg)[0]


def greedy_policy(mdp: Mdp, reg: Regularizer, v) -> np.ndarray:
    x = mdp.cost + mdp.gamma * (mdp.transition @ np.asarray(v, dtype=float))
    return _soft_min(x, reg)[1]


def optimal_value(mdp: Mdp, reg: Regularizer, tol: float = 1e-12,
                  max_iter: int = 1_000_000) -> tuple[np.ndarray, np.ndarray]:
    """Value iteration on the regularized optimality operator.

    Stops once ``||v_{t+1} - v_t||_inf <= tol * (1 - gamma) / gamma`` and returns the
    last iterate together with the (regularized) greedy policy it induces.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    threshold = tol * (1.0 - mdp.gamma) / mdp.gamma
    v = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        x = mdp.cost + mdp.gamma * (mdp.transition @ v)
        v_new, pi = _soft_min(x, reg)
        if np.max(np.abs(v_new - v)) <= threshold:
            return v_new, pi
        v = v_new
    raise ConvergenceError(f"value iteration did not converge in {max_iter} iterations")


def discounted_stationary(mdp: Mdp, policy, start) -> np.ndarray:
    """``d = (1 - gamma) * start @ (I - gamma P^pi)^{-1}``, solved as a row system."""
    P_pi = policy_transition(mdp, policy)
    lhs = (np.eye(mdp.n_states) - mdp.gamma * P_pi).T
    d = (1.0 - mdp.gamma) * np.linalg.solve(lhs, np.asarray(start, dtype=float))
    return np.maximum(d, 0.0)


def directional_derivative(mdp: Mdp, reg: Regularizer, pi, pi_prime) -> np.ndarray:
    """Derivative of ``v^pi`` along ``pi_prime - pi`` (state-wise vector)."""
    pi = np.asarray(pi, dtype=float)
    pi_prime = np.asarray(pi_prime, dtype=float)
    if reg.is_entropy and np.any(pi <= 0):
        raise GeometryDomainError("entropy directional derivative requires pi > 0")
    v = policy_value(mdp, pi, reg)
    inner = bellman_pi(mdp, pi_prime, reg, v) - v
    if reg.lam:
        inner = inner - reg.lam * bregman(reg, pi_prime, pi)
    lhs = np.eye(mdp.n_states) - mdp.gamma * policy_transition(mdp, pi)
    return np.linalg.solve(lhs, inner)


def value_upper_bound(mdp: Mdp, reg: Regularizer) -> float:
    consts = RegularizerConstants.for_problem(reg, mdp.n_actions, mdp.c_max, mdp.gamma)
    return consts.c_max_lambda / (1.0 - mdp.gamma)


def enumerate_deterministic_values(mdp: Mdp) -> np.ndarray:
    """Componentwise minimum of ``v^pi`` over all ``A^S`` deterministic policies."""
    reg = Regularizer(Geometry.EUCLIDEAN, 0.0)
    best = np.full(mdp.n_states, np.inf)
    for actions in itertools.product(range(mdp.n_actions), repeat=mdp.n_states):
        v = policy_value(mdp, deterministic_policy(actions, mdp.n_actions), reg)
        np.minimum(best, v, out=best)
    return best
