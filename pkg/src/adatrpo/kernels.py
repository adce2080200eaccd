"""Selects the rollout kernel at import: compiled if available, numpy otherwise.

Set ``ADATRPO_PURE_PYTHON=1`` to force the numpy implementation.
"""
from __future__ import annotations

import os

import numpy as np

from . import _rollout_py

BACKEND = "python"
simulate_trajectories = _rollout_py.simulate_trajectories

if os.environ.get("ADATRPO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _rollout  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        simulate_trajectories = _rollout.simulate_trajectories
        BACKEND = "cython"


def sampling_cdf(prob) -> np.ndarray:
    """Cumulative table for inverse-CDF draws along the last axis.

    Entries from the last positive-mass index onward are set to +inf, so
    ``first i with u < cdf[i]`` never runs off the end or lands on a zero-mass
    outcome because of rounding in the cumulative sum.
    """
    prob = np.asarray(prob, dtype=np.float64)
    cdf = np.cumsum(prob, axis=-1)
    positive = prob > 0
    n = prob.shape[-1]
    last = n - 1 - np.argmax(positive[..., ::-1], axis=-1)
    tail = np.arange(n) >= last[..., None]
    cdf[tail] = np.inf
    return np.ascontiguousarray(cdf)


def uniform_width(horizon: int) -> int:
    """Uniforms consumed per trajectory: 1 + 3T for the restart walk, 2T for the rollout."""
    return 1 + 5 * horizon
