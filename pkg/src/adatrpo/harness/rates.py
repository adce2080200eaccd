"""Least-squares rate fits on log-log gap curves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAP_CLIP = 1e-14
MIN_POINTS = 5


class DegenerateFitError(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float
    n_points: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "n_points": self.n_points}


def fit_rate(gaps, window: tuple[int, int], ks=None) -> RateFit:
    """OLS of ``log gap`` on ``log k`` for ``k_lo <= k <= k_hi``.

    ``gaps[i]`` belongs to iteration ``ks[i]`` (default ``i``). Points with
    gap below ``GAP_CLIP`` sit under the float-noise floor and are dropped.
    """
    gaps = np.asarray(gaps, dtype=float)
    ks = np.arange(gaps.size) if ks is None else np.asarray(ks, dtype=float)
    lo, hi = window
    if lo < 1 or hi < lo:
        raise ValueError(f"bad window {window}; log k needs k >= 1")
    if gaps.size == 0 or hi > ks.max():
        raise ValueError(f"window {window} outside the record range")
    sel = (ks >= lo) & (ks <= hi) & (gaps >= GAP_CLIP)
    if np.count_nonzero(sel) < MIN_POINTS:
        raise DegenerateFitError(
            f"only {np.count_nonzero(sel)} usable points in window {window}; need {MIN_POINTS}")
    x = np.log(ks[sel])
    y = np.log(gaps[sel])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), float(r2), int(sel.sum()))
