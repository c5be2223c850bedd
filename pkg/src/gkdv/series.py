"""Exponential-in-time series and the recursive approximate special solutions.

An ExpSeries represents sum_j e^{-j e0 t} f_j(x) over a finite set of integer
indices j >= 1. The recursion seeds Z_1 = A Y+ and solves
Z_{k+1} = -(calL - (k+1) e0)^{-1} U_{k+1}, where U_{k+1} is the index-(k+1)
coefficient of the nonlinear remainder R(V_k); the leftover defect
eps_k = dV/dt + calL V - R(V) carries indices k+1 .. p*k only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np
from scipy import fft as sfft
from scipy.special import comb

from .grid import Grid, GridFunction, from_padded, inner, to_padded, zero_function
from .linop import SpectralData, resolvent_solve
from .profiles import SolitonContext


@dataclass(frozen=True)
class ExpSeries:
    """Finite map j -> coefficient of e^{-j e0 t}; indices are >= 1."""

    e0: float
    grid: Grid
    terms: MappingProxyType

    def __post_init__(self):
        clean = {}
        for j, f in dict(self.terms).items():
            if int(j) != j or j < 1:
                raise ValueError(f"series indices must be integers >= 1, got {j}")
            v = f.values if isinstance(f, GridFunction) else np.asarray(f, float)
            if v.shape != (self.grid.n_points,):
                raise ValueError("coefficient grid mismatch")
            clean[int(j)] = GridFunction(self.grid, v)
        object.__setattr__(self, "terms", MappingProxyType(clean))

    @property
    def indices(self) -> list:
        return sorted(self.terms)

    def coefficient(self, j: int) -> GridFunction:
        return self.terms.get(j, zero_function(self.grid))

    def __add__(self, other: "ExpSeries") -> "ExpSeries":
        if self.grid != other.grid or self.e0 != other.e0:
            raise ValueError("series live on different grids or rates")
        merged = {j: f.values.copy() for j, f in self.terms.items()}
        for j, f in other.terms.items():
            if j in merged:
                merged[j] = merged[j] + f.values
            else:
                merged[j] = f.values
        return ExpSeries(self.e0, self.grid, MappingProxyType(merged))

    def scaled(self, a: float) -> "ExpSeries":
        return ExpSeries(self.e0, self.grid,
                         MappingProxyType({j: a * f.values for j, f in self.terms.items()}))

    def truncated(self, max_index: int) -> "ExpSeries":
        return ExpSeries(self.e0, self.grid,
                         MappingProxyType({j: f for j, f in self.terms.items()
                                           if j <= max_index}))


def make_series(e0: float, grid: Grid, terms: dict) -> ExpSeries:
    return ExpSeries(e0, grid, MappingProxyType(dict(terms)))


def series_eval(s: ExpSeries, t: float) -> GridFunction:
    """Evaluate sum_j e^{-j e0 t} f_j at time t."""
    acc = np.zeros(s.grid.n_points)
    for j, f in s.terms.items():
        acc += math.exp(-j * s.e0 * t) * f.values
    return GridFunction(s.grid, acc)


# --- index-convolution products on the dealiasing grid -------------------------

def _padded_terms(s: ExpSeries, m: int) -> dict:
    return {j: to_padded(f.values, m) for j, f in s.terms.items()}


def _convolve_power(padded: dict, k: int, max_index: int) -> dict:
    """k-fold index-convolution of padded coefficients, truncated in index."""
    acc = dict(padded)
    for _ in range(k - 1):
        nxt: dict = {}
        for j1, a in acc.items():
            for j2, b in padded.items():
                j = j1 + j2
                if j > max_index:
                    continue
                if j in nxt:
                    nxt[j] += a * b
                else:
                    nxt[j] = a * b
        acc = nxt
    return acc


def series_power(s: ExpSeries, k: int, max_index: int) -> ExpSeries:
    """Pointwise k-th power of the series, alias-free, index-truncated."""
    if k < 2:
        raise ValueError(f"power must be >= 2, got {k}")
    g = s.grid
    m = g.padded_points(k)
    prod = _convolve_power(_padded_terms(s, m), k, max_index)
    return make_series(s.e0, g, {j: from_padded(v, g.n_points) for j, v in prod.items()})


def _remainder_series(ctx: SolitonContext, v: ExpSeries, max_index: int) -> ExpSeries:
    """R(V) = -d/dx sum_{i=2}^p C(p,i) Q^{p-i} V^i as an ExpSeries."""
    p = ctx.p
    g = ctx.grid
    m = g.padded_points(p)
    qpad = to_padded(ctx.Q.values, m)
    vpad = _padded_terms(v, m)
    acc: dict = {}
    power = dict(vpad)   # V^i by iterated convolution
    for i in range(2, p + 1):
        power = _convolve_power_step(power, vpad, max_index)
        w = comb(p, i, exact=True) * qpad ** (p - i)
        for j, c in power.items():
            term = w * c
            if j in acc:
                acc[j] += term
            else:
                acc[j] = term
    kd = g.k_odd
    out = {}
    for j, c in acc.items():
        cg = from_padded(c, g.n_points)
        ch = sfft.rfft(cg)
        out[j] = -sfft.irfft(1j * kd * ch, n=g.n_points)
    return make_series(v.e0, g, out)


def _convolve_power_step(acc: dict, base: dict, max_index: int) -> dict:
    nxt: dict = {}
    for j1, a in acc.items():
        for j2, b in base.items():
            j = j1 + j2
            if j > max_index:
                continue
            if j in nxt:
                nxt[j] += a * b
            else:
                nxt[j] = a * b
    return nxt


def build_series(ctx: SolitonContext, sd: SpectralData, A: float,
                 k_max: int) -> tuple:
    """Construct (V_k, residual) up to order k_max for amplitude A.

    V_k collects indices 1..k_max; the residual collects the defect indices
    k_max+1 .. p*k_max. A = 0 yields the zero series (the soliton itself).
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    g = ctx.grid
    e0 = sd.e0
    coeffs = {1: A * sd.y_plus.values}
    for k in range(1, k_max):
        v = make_series(e0, g, coeffs)
        rem = _remainder_series(ctx, v, k + 1)
        u_next = rem.coefficient(k + 1)
        if inner(u_next, u_next) == 0.0:
            coeffs[k + 1] = np.zeros(g.n_points)
            continue
        # defect coefficient at k+1 is -R(V_k)_{k+1}; solving
        # (calL - (k+1)e0) Z = -U cancels it
        z = resolvent_solve(ctx, sd, u_next, (k + 1) * e0)
        coeffs[k + 1] = z.values
    v = make_series(e0, g, coeffs)
    full_rem = _remainder_series(ctx, v, ctx.p * k_max)
    residual_terms = {}
    for j in full_rem.indices:
        if j > k_max:
            residual_terms[j] = -full_rem.coefficient(j).values
    return v, make_series(e0, g, residual_terms)


def defect_series(ctx: SolitonContext, sd: SpectralData, v: ExpSeries,
                  max_index: int) -> ExpSeries:
    """Full defect dV/dt + calL V - R(V), index-truncated; diagnostic."""
    from .linop import apply_Lcal

    g = ctx.grid
    lin = {}
    for j in v.indices:
        f = v.coefficient(j)
        lin[j] = (apply_Lcal(ctx, f) - j * sd.e0 * f).values
    rem = _remainder_series(ctx, v, max_index)
    out = dict(lin)
    for j in rem.indices:
        if j in out:
            out[j] = out[j] - rem.coefficient(j).values
        else:
            out[j] = -rem.coefficient(j).values
    return make_series(v.e0, g, out)


@dataclass(frozen=True)
class CoefficientDecay:
    index: int
    rate: float
    amplitude: float
    skipped: bool
    note: str = ""


def coefficient_decay_report(s: ExpSeries, sd: SpectralData,
                             x_min: float = 5.0) -> list:
    """Fitted exponential spatial decay rate of each coefficient.

    Coefficients oscillate in the tail, so the fit runs on binned envelope
    maxima of |f_j| over x_min <= |x| <= L/2.
    """
    from .fitting import envelope_rate

    g = s.grid
    out = []
    for j in s.indices:
        f = s.coefficient(j)
        peak = float(np.max(np.abs(f.values)))
        if peak == 0.0 or peak < 1e-250:
            out.append(CoefficientDecay(j, math.nan, 0.0, True, "numerically zero"))
            continue
        rate = envelope_rate(g.x, np.abs(f.values), x_min, g.half_length / 2.0)
        out.append(CoefficientDecay(j, rate, peak, False))
    return out
