"""Closed-form soliton family, conserved functionals and unstable initial data.

The ground state Q solves Q'' + Q^p = Q with the explicit profile
Q(x) = [(p+1) / (2 cosh^2((p-1)x/2))]^{1/(p-1)}, and Q_c is its speed-c
rescaling c^{1/(p-1)} Q(sqrt(c) x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .grid import Grid, GridFunction, derivative, inner


@dataclass(frozen=True)
class FunctionalValues:
    mass: float
    energy: float
    weinstein: float


def eval_Q(p: int, x):
    """Ground-state profile at speed 1."""
    x = np.asarray(x, dtype=float)
    sech2 = 1.0 / np.cosh(0.5 * (p - 1) * x) ** 2
    return ((p + 1) / 2.0 * sech2) ** (1.0 / (p - 1))


def eval_Q_prime(p: int, x):
    """Q'(x) = -Q(x) tanh((p-1)x/2), from the closed form."""
    x = np.asarray(x, dtype=float)
    return -eval_Q(p, x) * np.tanh(0.5 * (p - 1) * x)


def eval_Qc(p: int, c: float, x):
    """Speed-c soliton Q_c(x) = c^{1/(p-1)} Q(sqrt(c) x)."""
    if c <= 0:
        raise ValueError(f"soliton speed must be positive, got c={c}")
    return c ** (1.0 / (p - 1)) * eval_Q(p, math.sqrt(c) * np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SolitonContext:
    """Nonlinearity exponent, speed, grid and precomputed Q_c data.

    p >= 2 is accepted for utility use; the instability/special-solution
    experiments additionally require the supercritical range p > 5.
    """

    p: int
    c: float
    grid: Grid

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError(f"p must be an integer >= 2, got {self.p}")
        if self.c <= 0:
            raise ValueError(f"c must be positive, got {self.c}")
        object.__setattr__(self, "p", int(self.p))

    @property
    def supercritical(self) -> bool:
        return self.p > 5

    # --- cached profile data -------------------------------------------------
    @property
    def Q(self) -> GridFunction:
        return _profile_cache(self.p, self.c, self.grid)[0]

    @property
    def Q_prime(self) -> GridFunction:
        return _profile_cache(self.p, self.c, self.grid)[1]

    @property
    def S(self) -> GridFunction:
        """Scaling derivative S = dQ_c/dc at c=1 (requires c == 1)."""
        return scaling_derivative_S(self)

    @property
    def functionals_Q(self) -> FunctionalValues:
        return functionals(self.Q, self)

    @property
    def gn_constant(self) -> float:
        """Optimal Gagliardo-Nirenberg constant, calibrated so Q is extremal."""
        return _gn_constant(self.p, self.c, self.grid)


@lru_cache(maxsize=32)
def _profile_cache(p: int, c: float, grid: Grid):
    q = GridFunction(grid, eval_Qc(p, c, grid.x))
    sq = math.sqrt(c)
    qp = GridFunction(grid, c ** (1.0 / (p - 1)) * sq * eval_Q_prime(p, sq * grid.x))
    return q, qp


@lru_cache(maxsize=32)
def _gn_constant(p: int, c: float, grid: Grid) -> float:
    q, qp = _profile_cache(p, c, grid)
    num = grid.dx * float(np.sum(np.abs(q.values) ** (p + 1)))
    gx = inner(qp, qp)
    gm = inner(q, q)
    return num / (gx ** ((p - 1) / 4.0) * gm ** ((p + 3) / 4.0))


def make_context(p: int, c: float = 1.0, half_length: float = 40.0,
                 n_points: int = 1024) -> SolitonContext:
    return SolitonContext(p, c, Grid(half_length, n_points))


def scaling_derivative_S(ctx: SolitonContext) -> GridFunction:
    """S(x) = Q(x)/(p-1) + x Q'(x)/2, satisfying L S = -Q."""
    if ctx.c != 1.0:
        raise ValueError("the scaling derivative S is defined at c = 1")
    g = ctx.grid
    return GridFunction(g, ctx.Q.values / (ctx.p - 1) + 0.5 * g.x * ctx.Q_prime.values)


def functionals(u: GridFunction, ctx: SolitonContext) -> FunctionalValues:
    """Mass, energy and Weinstein functional F = E + mass/2 by quadrature."""
    p = ctx.p
    mass = inner(u, u)
    ux = derivative(u, 1)
    energy = 0.5 * inner(ux, ux) - u.grid.dx * float(np.sum(u.values ** (p + 1))) / (p + 1)
    return FunctionalValues(mass=mass, energy=energy, weinstein=energy + 0.5 * mass)


def instability_data(ctx: SolitonContext, n: int, sign: int = 1) -> GridFunction:
    """Unstable initial data u_{0,n}(x) = lam Q(lam^2 x), lam = 1 + sign/n.

    Mass equals the soliton mass exactly in the continuum; the energy lies
    strictly below E(Q) in the supercritical range.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    if sign == -1 and n < 2:
        raise ValueError("sign=-1 requires n >= 2 so that lam > 0")
    lam = 1.0 + sign / n
    g = ctx.grid
    return GridFunction(g, lam * eval_Q(ctx.p, lam**2 * g.x))


def gn_equality_check(v: GridFunction, ctx: SolitonContext) -> float:
    """Gagliardo-Nirenberg defect, zero on the soliton orbit, <= 0 otherwise.

    Returns int |v|^{p+1} - C_GN ||v_x||^{(p-1)/2} ||v||^{(p+3)/2} with the
    calibrated optimal constant.
    """
    if not np.any(v.values):
        raise ValueError("Gagliardo-Nirenberg defect undefined for v = 0")
    p = ctx.p
    lhs = v.grid.dx * float(np.sum(np.abs(v.values) ** (p + 1)))
    vx = derivative(v, 1)
    rhs = ctx.gn_constant * inner(vx, vx) ** ((p - 1) / 4.0) * inner(v, v) ** ((p + 3) / 4.0)
    return lhs - rhs
