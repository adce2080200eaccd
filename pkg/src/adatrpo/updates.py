"""Per-state mirror-descent policy updates and step-size schedules.

Both updates solve, for every row ``s``,

    argmin_{p in simplex}  t <q(s, .) + lam * grad omega(pi(s, .)), p> + B(p, pi(s, .))

PPG (euclidean) and NE-TRPO (entropy). They accept a single row ``(A,)`` or a
stack of rows ``(S, A)`` and act independently on each row.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .geometry import Geometry, GeometryDomainError, RegularizerConstants, project_simplex

LOG_FLOOR = 1e-300


class StepSizeError(ValueError):
    pass


class ScheduleKind(str, enum.Enum):
    UNREGULARIZED_SQRT = "unregularized"
    REGULARIZED_HARMONIC = "regularized"
    FIXED = "fixed"

    @classmethod
    def parse(cls, value) -> "ScheduleKind":
        if isinstance(value, ScheduleKind):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True)
class StepSize:
    t_k: float
    kind: ScheduleKind


def step_size(kind, k: int, consts: RegularizerConstants, gamma: float | None = None,
              lam: float | None = None, fixed: float | None = None) -> StepSize:
    """Step size for iteration ``k``.

    unregularized: ``(1 - gamma) / (C_omega1 * C_max * sqrt(k + 1))``
    regularized:   ``1 / (lam * (k + 2))``
    """
    kind = ScheduleKind.parse(kind)
    gamma = consts.gamma if gamma is None else gamma
    lam = consts.lam if lam is None else lam
    if kind is ScheduleKind.REGULARIZED_HARMONIC:
        if lam <= 0:
            raise StepSizeError("the regularized schedule needs lam > 0")
        return StepSize(1.0 / (lam * (k + 2)), kind)
    if kind is ScheduleKind.UNREGULARIZED_SQRT:
        t = (1.0 - gamma) / (consts.c_omega_1 * consts.c_max * math.sqrt(k + 1))
        return StepSize(t, kind)
    if fixed is None or fixed < 0:
        raise StepSizeError("a fixed schedule needs a nonnegative step")
    return StepSize(float(fixed), kind)


def default_schedule(lam: float) -> ScheduleKind:
    return ScheduleKind.REGULARIZED_HARMONIC if lam > 0 else ScheduleKind.UNREGULARIZED_SQRT


def _t(t_k) -> float:
    return t_k.t_k if isinstance(t_k, StepSize) else float(t_k)


def ppg_update(pi_s, q_s, t_k, lam: float) -> np.ndarray:
    """Projected step ``P_simplex((1 - lam t) pi - t q)``.

    For ``lam = 0`` this is ``P_simplex(pi - t q)``. For ``lam > 0`` the
    ``(1 - lam t)`` factor must stay inside the projection: projecting the
    rescaled point ``pi - t q / (1 - lam t)`` gives a different (and not
    optimal) row.
    """
    t = _t(t_k)
    if t < 0:
        raise StepSizeError("step size must be nonnegative")
    if lam * t >= 1.0:
        raise StepSizeError(f"PPG needs lam * t < 1, got {lam * t}")
    pi_s = np.asarray(pi_s, dtype=float)
    q_s = np.asarray(q_s, dtype=float)
    if t == 0.0:
        return pi_s.copy()
    return project_simplex((1.0 - lam * t) * pi_s - t * q_s)


class LogFloorCounter:
    """Counts rows whose probabilities had to be floored before taking logs."""

    def __init__(self):
        self.count = 0

    def __repr__(self):
        return f"LogFloorCounter(count={self.count})"


def netrpo_update(pi_s, q_s, t_k, lam: float, floor_counter: LogFloorCounter | None = None
                  ) -> np.ndarray:
    """Exponentiated step ``pi' ∝ pi * exp(-t (q + lam log pi))`` in log space."""
    t = _t(t_k)
    if t < 0:
        raise StepSizeError("step size must be nonnegative")
    pi_s = np.asarray(pi_s, dtype=float)
    q_s = np.asarray(q_s, dtype=float)
    if np.any(pi_s <= 0):
        raise GeometryDomainError("NE-TRPO update requires a strictly positive policy")
    if t == 0.0:
        return pi_s.copy()
    tiny = pi_s < LOG_FLOOR
    if np.any(tiny):
        if floor_counter is not None:
            floor_counter.count += int(np.count_nonzero(tiny))
        pi_s = np.maximum(pi_s, LOG_FLOOR)
    logits = (1.0 - lam * t) * np.log(pi_s) - t * q_s
    logits = logits - logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    out = w / w.sum(axis=-1, keepdims=True)
    if np.any(out <= 0):
        out = np.maximum(out, LOG_FLOOR)
        out = out / out.sum(axis=-1, keepdims=True)
        if floor_counter is not None:
            floor_counter.count += 1
    return out


def policy_update(geometry: Geometry, pi, q, t_k, lam: float, floor_counter=None) -> np.ndarray:
    if Geometry.parse(geometry) is Geometry.EUCLIDEAN:
        return ppg_update(pi, q, t_k, lam)
    return netrpo_update(pi, q, t_k, lam, floor_counter)
