"""Uniform periodic grid and Fourier-based calculus.

The domain is the periodic interval [-L, L) sampled at N equispaced points.
All fields handled by the package are real samples on such a grid; spectral
derivatives, Sobolev norms and dealiased pointwise powers are provided here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import fft as sfft


class GridMismatchError(ValueError):
    """Two grid functions living on different grids were combined."""


@dataclass(frozen=True)
class Grid:
    """Periodic grid on [-L, L) with N points, spacing dx = 2L/N."""

    half_length: float
    n_points: int

    def __post_init__(self):
        if self.half_length <= 0:
            raise ValueError(f"half_length must be positive, got {self.half_length}")
        if self.n_points < 16 or self.n_points % 2 != 0:
            raise ValueError(f"n_points must be even and >= 16, got {self.n_points}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_length / self.n_points

    @cached_property
    def x(self) -> np.ndarray:
        x = -self.half_length + self.dx * np.arange(self.n_points)
        x.setflags(write=False)
        return x

    @cached_property
    def k(self) -> np.ndarray:
        """rfft wavenumbers j*pi/L, j = 0..N/2."""
        k = np.arange(self.n_points // 2 + 1) * (math.pi / self.half_length)
        k.setflags(write=False)
        return k

    @cached_property
    def k_odd(self) -> np.ndarray:
        """Wavenumbers for odd-order derivatives: Nyquist mode zeroed."""
        k = self.k.copy()
        k[-1] = 0.0
        k.setflags(write=False)
        return k

    def padded_points(self, degree: int) -> int:
        """Grid size resolving a degree-`degree` product without aliasing.

        A product of `degree` fields band-limited to N/2 has modes up to
        degree*N/2; truncating its M-point sampling back to N/2 modes is
        alias-free once M >= (degree+1)*N/2.
        """
        return math.ceil((degree + 1) / 2) * self.n_points


@dataclass(frozen=True)
class GridFunction:
    """Real field sampled on a Grid. Values are immutable."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise ValueError(f"expected {self.grid.n_points} samples, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def _check(self, other: "GridFunction"):
        if self.grid != other.grid:
            raise GridMismatchError("grid functions live on different grids")

    def __add__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values - other.values)

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __mul__(self, a):
        if not np.isscalar(a):
            return NotImplemented
        return GridFunction(self.grid, a * self.values)

    __rmul__ = __mul__


def derivative(u: GridFunction, order: int) -> GridFunction:
    """Spectral derivative of order 1..4 (exact on band-limited data)."""
    if order not in (1, 2, 3, 4):
        raise ValueError(f"derivative order must be in 1..4, got {order}")
    g = u.grid
    k = g.k_odd if order % 2 else g.k
    uh = sfft.rfft(u.values)
    uh *= (1j * k) ** order
    return GridFunction(g, sfft.irfft(uh, n=g.n_points))


def inner(u: GridFunction, v: GridFunction) -> float:
    """L2 inner product by periodic trapezoidal quadrature."""
    u._check(v)
    return float(u.grid.dx * np.dot(u.values, v.values))


def hs_norm(u: GridFunction, s: int) -> float:
    """Discrete H^s norm: (1+k^2)^{s/2}-weighted spectral l2 norm."""
    if s not in (0, 1, 2, 3, 4):
        raise ValueError(f"s must be an integer in 0..4, got {s}")
    g = u.grid
    uh = sfft.rfft(u.values)
    w = (1.0 + g.k**2) ** s
    # rfft stores one-sided spectrum; double interior bins for Parseval.
    mult = np.full(g.n_points // 2 + 1, 2.0)
    mult[0] = 1.0
    mult[-1] = 1.0
    total = np.sum(w * mult * np.abs(uh) ** 2)
    return math.sqrt(total * 2.0 * g.half_length) / g.n_points


def spectral_inner(u: GridFunction, v: GridFunction) -> float:
    """Inner product evaluated in spectral space (Parseval check path)."""
    u._check(v)
    g = u.grid
    uh = sfft.rfft(u.values)
    vh = sfft.rfft(v.values)
    mult = np.full(g.n_points // 2 + 1, 2.0)
    mult[0] = 1.0
    mult[-1] = 1.0
    total = np.sum(mult * (uh * np.conj(vh)).real)
    return float(total * 2.0 * g.half_length) / g.n_points**2


def to_padded(values: np.ndarray, n_padded: int) -> np.ndarray:
    """Resample band-limited values onto a finer grid of n_padded points."""
    n = values.shape[0]
    uh = sfft.rfft(values)
    uh[-1] = 0.0  # drop the ambiguous Nyquist bin before upsampling
    ph = np.zeros(n_padded // 2 + 1, dtype=complex)
    ph[: n // 2 + 1] = uh
    return sfft.irfft(ph, n=n_padded) * (n_padded / n)


def from_padded(values_padded: np.ndarray, n: int) -> np.ndarray:
    """Truncate a padded-grid field back to the N-point grid spectrum."""
    m = values_padded.shape[0]
    ph = sfft.rfft(values_padded)
    uh = ph[: n // 2 + 1].copy()
    uh[-1] = 0.0
    return sfft.irfft(uh, n=n) * (n / m)


def nonlinear_power(u: GridFunction, k: int) -> GridFunction:
    """Pointwise power u^k computed alias-free via a zero-padded transform."""
    if k < 2:
        raise ValueError(f"power must be >= 2, got {k}")
    g = u.grid
    m = g.padded_points(k)
    up = to_padded(u.values, m)
    return GridFunction(g, from_padded(up**k, g.n_points))


def shift(u: GridFunction, a: float) -> GridFunction:
    """Translate: returns u(. + a) via Fourier phase shift."""
    g = u.grid
    uh = sfft.rfft(u.values)
    uh *= np.exp(1j * g.k_odd * a)
    return GridFunction(g, sfft.irfft(uh, n=g.n_points))


def reflect(u: GridFunction) -> GridFunction:
    """Spatial reflection x -> -x (exact on the symmetric periodic grid)."""
    return GridFunction(u.grid, np.roll(u.values[::-1], 1))


def zero_function(g: Grid) -> GridFunction:
    return GridFunction(g, np.zeros(g.n_points))
