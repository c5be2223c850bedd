"""Least-squares slope fits for decay-rate diagnostics.

Every fitted rate reported by the package carries its fit window and residual
so reports remain auditable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    window: tuple
    n_used: int
    rms_residual: float


def fit_log_slope(t, y, head_frac: float = 0.1, tail_frac: float = 0.1,
                  drop_floor: bool = True) -> FitResult:
    """Least-squares slope of log y(t).

    Excludes the leading head_frac of samples (transient) and the trailing
    tail_frac (floor). With drop_floor, samples after the global minimum of y
    are discarded first: once a decaying signal hits the numerical floor it
    stops carrying rate information.
    """
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    if t.size != y.size or t.size < 4:
        raise ValueError("need at least 4 samples to fit a slope")
    if np.any(y <= 0):
        raise ValueError("log fit needs positive data")
    n = t.size
    stop = n
    if drop_floor:
        stop = int(np.argmin(y)) + 1
    lo = int(math.floor(head_frac * n))
    hi = stop - int(math.floor(tail_frac * stop))
    if hi - lo < 4:
        lo, hi = 0, stop
    ts, ys = t[lo:hi], np.log(y[lo:hi])
    a = np.vstack([ts, np.ones_like(ts)]).T
    coef, *_ = np.linalg.lstsq(a, ys, rcond=None)
    resid = ys - a @ coef
    return FitResult(slope=float(coef[0]), intercept=float(coef[1]),
                     window=(float(ts[0]), float(ts[-1])), n_used=int(hi - lo),
                     rms_residual=float(np.sqrt(np.mean(resid**2))))


def envelope_rate(x, absvals, x_min: float, x_max: float, n_bins: int = 10) -> float:
    """Exponential decay rate of an oscillatory profile from binned maxima.

    Pools both tails by |x|, takes the max of |f| per |x|-bin and fits
    log(max) against the bin center; returns the positive decay rate.
    """
    x = np.asarray(x, float)
    v = np.asarray(absvals, float)
    r = np.abs(x)
    sel = (r >= x_min) & (r <= x_max)
    if not np.any(sel):
        raise ValueError("empty envelope window")
    edges = np.linspace(x_min, x_max, n_bins + 1)
    centers, maxima = [], []
    for i in range(n_bins):
        m = sel & (r >= edges[i]) & (r < edges[i + 1])
        if np.any(m):
            centers.append(0.5 * (edges[i] + edges[i + 1]))
            maxima.append(np.max(v[m]))
    centers = np.array(centers)
    maxima = np.array(maxima)
    good = maxima > 0
    if good.sum() < 3:
        raise ValueError("not enough nonzero envelope bins")
    a = np.vstack([centers[good], np.ones(int(good.sum()))]).T
    coef, *_ = np.linalg.lstsq(a, np.log(maxima[good]), rcond=None)
    return float(-coef[0])
