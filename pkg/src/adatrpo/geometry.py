"""Bregman geometries on the probability simplex.

Two choices of the strongly convex generator ``omega`` are supported:

* euclidean: ``omega(p) = 0.5 * ||p||^2``, Bregman distance ``0.5 * ||p - q||^2``
* negative entropy: ``omega(p) = sum p log p + log A``, Bregman distance ``KL(p || q)``

Every function accepts either a single simplex point (shape ``(A,)``) or a
stack of points (shape ``(..., A)``); reductions run over the last axis.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class GeometryDomainError(ValueError):
    """Raised when an entropy quantity is requested outside its domain."""


class Geometry(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    NEG_ENTROPY = "entropy"

    @classmethod
    def parse(cls, value: "Geometry | str") -> "Geometry":
        if isinstance(value, Geometry):
            return value
        aliases = {"euclidean": cls.EUCLIDEAN, "l2": cls.EUCLIDEAN, "ppg": cls.EUCLIDEAN,
                   "entropy": cls.NEG_ENTROPY, "negentropy": cls.NEG_ENTROPY,
                   "kl": cls.NEG_ENTROPY, "netrpo": cls.NEG_ENTROPY}
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ValueError(f"unknown geometry {value!r}") from None


@dataclass(frozen=True)
class Regularizer:
    """Geometry choice plus regularization weight ``lam >= 0``."""

    geometry: Geometry
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "geometry", Geometry.parse(self.geometry))
        if not (self.lam >= 0.0 and math.isfinite(self.lam)):
            raise ValueError(f"regularization weight must be finite and >= 0, got {self.lam}")

    @property
    def is_entropy(self) -> bool:
        return self.geometry is Geometry.NEG_ENTROPY


def _xlogx(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p, dtype=float)
    pos = p > 0
    out[pos] = p[pos] * np.log(p[pos])
    return out


def omega(geometry: Geometry | Regularizer, p) -> np.ndarray | float:
    """Generator value; 0 log 0 is taken as 0 in the entropy case."""
    geometry = _geom(geometry)
    p = np.asarray(p, dtype=float)
    if geometry is Geometry.EUCLIDEAN:
        out = 0.5 * np.sum(p * p, axis=-1)
    else:
        out = np.sum(_xlogx(p), axis=-1) + math.log(p.shape[-1])
    return out if out.ndim else float(out)


def omega_grad(geometry: Geometry | Regularizer, p) -> np.ndarray:
    geometry = _geom(geometry)
    p = np.asarray(p, dtype=float)
    if geometry is Geometry.EUCLIDEAN:
        return p.copy()
    if np.any(p <= 0):
        raise GeometryDomainError("entropy gradient is undefined on the simplex boundary")
    return 1.0 + np.log(p)


def bregman(geometry: Geometry | Regularizer, p, q) -> np.ndarray | float:
    """Bregman distance ``B(p, q)``: half squared L2 distance, or ``KL(p || q)``."""
    geometry = _geom(geometry)
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if geometry is Geometry.EUCLIDEAN:
        d = p - q
        out = 0.5 * np.sum(d * d, axis=-1)
    else:
        p, q = np.broadcast_arrays(p, q)
        pos = p > 0
        if np.any(q[pos] <= 0):
            raise GeometryDomainError("KL(p || q) requires q > 0 wherever p > 0")
        terms = np.zeros(p.shape)
        terms[pos] = p[pos] * (np.log(p[pos]) - np.log(q[pos]))
        # clip tiny negative rounding, KL is nonnegative
        out = np.maximum(np.sum(terms, axis=-1), 0.0)
    return out if out.ndim else float(out)


def project_simplex(x) -> np.ndarray:
    """Euclidean projection onto the unit simplex, row-wise over the last axis.

    Sort-and-threshold: with ``u`` sorted descending, find the largest ``k``
    such that ``u_k - (sum_{i<=k} u_i - 1) / k > 0`` and subtract that
    threshold from every entry before clipping at zero.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot project non-finite values")
    flat = x.reshape(-1, x.shape[-1])
    n = flat.shape[1]
    u = -np.sort(-flat, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ks = np.arange(1, n + 1)
    cond = u - css / ks > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(flat.shape[0]), rho] / (rho + 1)
    out = np.maximum(flat - theta[:, None], 0.0)
    return out.reshape(x.shape)


@dataclass(frozen=True)
class RegularizerConstants:
    """Geometry-dependent constants used by step sizes and sample budgets."""

    geometry: Geometry
    lam: float
    n_actions: int
    c_max: float
    gamma: float

    @classmethod
    def for_problem(cls, reg: Regularizer, n_actions: int, c_max: float, gamma: float):
        return cls(reg.geometry, reg.lam, int(n_actions), float(c_max), float(gamma))

    @property
    def _entropy(self) -> bool:
        return self.geometry is Geometry.NEG_ENTROPY

    @property
    def c_max_lambda(self) -> float:
        if self._entropy:
            return self.c_max + self.lam * math.log(self.n_actions)
        return self.c_max + self.lam

    @property
    def c_omega_1(self) -> float:
        return 1.0 if self._entropy else math.sqrt(self.n_actions)

    @property
    def c_omega_2(self) -> float:
        return float(self.n_actions) ** 2 if self._entropy else 1.0

    @property
    def c_omega_3(self) -> float:
        return math.log(self.n_actions) if self._entropy else 1.0

    @property
    def d_omega(self) -> float:
        return math.log(self.n_actions) if self._entropy else 1.0

    def _log_growth(self, k: int) -> float:
        # log k is undefined at k = 0; iterations 0 and 1 share the constant term
        if not self._entropy or self.lam == 0.0:
            return 0.0
        return math.log(max(int(k), 1))

    def h_omega(self, k: int = 0) -> float:
        """Bound on the dual norm of ``q + lam * grad omega`` at iteration ``k``."""
        scale = self.c_max_lambda / (1.0 - self.gamma)
        if self._entropy:
            return scale * (1.0 + self._log_growth(k))
        return math.sqrt(self.n_actions) * scale

    def r_omega(self, k: int = 0) -> float:
        """Per-sample range bound used for Hoeffding sample counts."""
        base = 4.0 * self.n_actions * self.c_max_lambda / (1.0 - self.gamma)
        return base * (1.0 + self._log_growth(k))

    def grad_drift_bound(self, k: int, t_k: float) -> float:
        """Bound on ``||grad omega(pi_{k+1}) - grad omega(pi_k)||_inf`` for one update."""
        scale = self.n_actions * self.c_max_lambda / (1.0 - self.gamma)
        if not self._entropy:
            return t_k * math.sqrt(self.n_actions) * scale
        if self.lam == 0.0:
            return 2.0 * t_k * scale
        return t_k * scale * (4.0 + 3.0 * math.log(max(int(k), 1)))


def _geom(g) -> Geometry:
    if isinstance(g, Regularizer):
        return g.geometry
    return Geometry.parse(g)
