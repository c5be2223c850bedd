"""The operators L and calL = -d/dx L: spectra, eigenfunctions, coercivity.

L u = -u'' + u - p Q^{p-1} u is the self-adjoint Hessian of the Weinstein
functional at Q; its antisymmetrized companion calL = -(L u)' generates the
linearized co-moving flow. calL has essential spectrum on the imaginary axis
and a single real eigenvalue pair {-e0, +e0} plus the kernel direction Q'.
Eigenpairs come from a dense eigendecomposition, cross-checked by an
independent shooting oracle on the third-order eigenvalue ODE.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft
from scipy import linalg as sla
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .grid import Grid, GridFunction, derivative, inner, reflect
from .profiles import SolitonContext, eval_Q, eval_Q_prime


class SpectralAmbiguityError(RuntimeError):
    """Eigenvalue filtering did not isolate a single positive real eigenvalue."""


class NearSingularShiftError(ValueError):
    """Resolvent shift too close to the computed spectrum."""


class ShootingError(RuntimeError):
    """No sign change of the connection determinant in the given bracket."""


def _require_unit_speed(ctx: SolitonContext):
    if ctx.c != 1.0:
        raise ValueError("linearized-operator routines are defined at c = 1; "
                         "rescale states to unit speed first")


def apply_L(ctx: SolitonContext, u: GridFunction) -> GridFunction:
    """L u = -u'' + u - p Q^{p-1} u."""
    _require_unit_speed(ctx)
    w = ctx.p * ctx.Q.values ** (ctx.p - 1)
    return GridFunction(ctx.grid,
                        -derivative(u, 2).values + u.values - w * u.values)


def apply_Lcal(ctx: SolitonContext, u: GridFunction) -> GridFunction:
    """calL u = -(L u)'."""
    return -derivative(apply_L(ctx, u), 1)


# --- dense matrices ----------------------------------------------------------

_matrix_cache: dict = {}


def _diff_matrices(g: Grid):
    key = (g.half_length, g.n_points)
    hit = _matrix_cache.get(key)
    if hit is not None:
        return hit
    n = g.n_points
    eye = np.eye(n)
    f = sfft.fft(eye, axis=0)
    kfull = np.fft.fftfreq(n, d=1.0 / n) * (math.pi / g.half_length)
    kodd = kfull.copy()
    kodd[n // 2] = 0.0
    d1 = np.real(sfft.ifft((1j * kodd)[:, None] * f, axis=0))
    d2 = np.real(sfft.ifft(-(kfull**2)[:, None] * f, axis=0))
    _matrix_cache[key] = (d1, d2)
    return d1, d2


def l_matrix(ctx: SolitonContext) -> np.ndarray:
    """Dense symmetric matrix of L (acts on sample vectors)."""
    _require_unit_speed(ctx)
    _, d2 = _diff_matrices(ctx.grid)
    w = ctx.p * ctx.Q.values ** (ctx.p - 1)
    return -d2 + np.eye(ctx.grid.n_points) - np.diag(w)


def lcal_matrix(ctx: SolitonContext) -> np.ndarray:
    """Dense matrix of calL = -D1 @ L."""
    d1, _ = _diff_matrices(ctx.grid)
    return -d1 @ l_matrix(ctx)


# --- cubic characteristic roots and decay rate -------------------------------

@dataclass(frozen=True)
class CubicRoots:
    """Roots of x^3 - x - lam = 0 sorted by real part; sigma3 is real."""

    sigma1: complex
    sigma2: complex
    sigma3: float
    lam: float

    @property
    def complex_pair(self) -> bool:
        return self.lam > 2.0 / (3.0 * math.sqrt(3.0))


def cubic_roots(lam: float) -> CubicRoots:
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    r = np.roots([1.0, 0.0, -1.0, -lam])
    # one Newton polish pass; harmless at simple roots, cheap at double ones
    for _ in range(2):
        f = r**3 - r - lam
        df = 3.0 * r**2 - 1.0
        step = np.where(np.abs(df) > 1e-8, f / np.where(df == 0, 1, df), 0.0)
        r = r - step
    order = np.argsort(r.real)
    r = r[order]
    s3 = float(r[2].real)
    return CubicRoots(sigma1=complex(r[0]), sigma2=complex(r[1]), sigma3=s3, lam=lam)


def decay_rate_mu(e0: float, scan_width: float = 10.0, n_scan: int = 200) -> float:
    """mu = (1/4) min over lam >= e0 of (sigma3, -Re sigma2, e0, 1).

    sigma3 and -Re sigma2 are nondecreasing in lam, so the minimum sits at
    lam = e0; a dense scan over [e0, e0 + scan_width] double-checks that.
    """
    if e0 <= 0:
        raise ValueError(f"e0 must be positive, got {e0}")
    r0 = cubic_roots(e0)
    m = min(r0.sigma3, -r0.sigma2.real, e0, 1.0)
    for lam in np.linspace(e0, e0 + scan_width, n_scan):
        r = cubic_roots(float(lam))
        m = min(m, r.sigma3, -r.sigma2.real)
    return 0.25 * m


# --- spectral data ------------------------------------------------------------

@dataclass(frozen=True)
class SpectralData:
    """Real eigenpair of calL with adjoint eigenfunctions and certificates.

    Normalization follows the adjoint pairing: (Y+, Z-) = (Y-, Z+) = 1 with
    Z± = L Y± and the overall sign fixed by (Q', Y+') > 0. Y- is then
    reflection_sign * reflect(Y+) where reflection_sign is the sign of the
    raw pairing (Y+, L reflect(Y+)); for p = 6 that pairing is negative, so
    Y- is minus the reflection.
    """

    ctx: SolitonContext
    e0: float
    mu: float
    y_plus: GridFunction
    y_minus: GridFunction
    z_plus: GridFunction
    z_minus: GridFunction
    residual_plus: float
    residual_minus: float
    reflection_sign: int
    certificate: dict
    eigenvalues: np.ndarray = field(repr=False)
    cluster_max_real: float = 0.0

    @property
    def grid(self) -> Grid:
        return self.ctx.grid


def compute_spectrum(ctx: SolitonContext, imag_tol_factor: float = 1e-8,
                     real_tol: float | None = None) -> SpectralData:
    """Dense eigendecomposition of calL with real-pair filtering.

    Raises SpectralAmbiguityError unless exactly one eigenvalue survives the
    filter |Im| < imag_tol_factor * spectral_radius, Re > real_tol. By default
    real_tol scales with the spectral radius too: the discretized kernel
    eigenvalue (direction Q') splits off zero proportionally to ||calL|| eps.
    """
    _require_unit_speed(ctx)
    if ctx.p <= 5:
        raise ValueError("spectrum of the real pair requires the supercritical "
                         f"range p > 5, got p={ctx.p}")
    a = lcal_matrix(ctx)
    vals, vecs = np.linalg.eig(a)
    radius = float(np.max(np.abs(vals)))
    imag_tol = imag_tol_factor * radius
    if real_tol is None:
        real_tol = max(1e-6, imag_tol_factor * radius)
    sel = (np.abs(vals.imag) < imag_tol) & (vals.real > real_tol)
    idx = np.flatnonzero(sel)
    if idx.size != 1:
        raise SpectralAmbiguityError(
            f"expected one positive real eigenvalue, found {idx.size} "
            f"(candidates: {vals[idx]}); adjust N/L or the filter tolerances")
    i0 = int(idx[0])
    e0 = float(vals[i0].real)

    v = vecs[:, i0]
    v = v / v[int(np.argmax(np.abs(v)))]   # rotate the arbitrary complex phase out
    y_raw = GridFunction(ctx.grid, np.ascontiguousarray(v.real))

    # Scale so the adjoint pairing has unit magnitude, splitting it evenly
    # between Y+ and Y-; then (Y+, Z-) = (Y-, Z+) = 1 with Y- = ±reflect(Y+).
    eta = inner(y_raw, apply_L(ctx, reflect(y_raw)))
    if eta == 0:
        raise SpectralAmbiguityError("adjoint pairing (Y+, L reflect Y+) vanished")
    refl_sign = 1 if eta > 0 else -1
    y_plus = (1.0 / math.sqrt(abs(eta))) * y_raw
    if inner(ctx.Q_prime, derivative(y_plus, 1)) < 0:
        y_plus = -y_plus
    y_minus = refl_sign * reflect(y_plus)
    z_plus = apply_L(ctx, y_plus)
    z_minus = apply_L(ctx, y_minus)

    def rel_residual(y, sign):
        r = apply_Lcal(ctx, y) - sign * e0 * y
        return math.sqrt(inner(r, r) / inner(y, y))

    qp = ctx.Q_prime
    cert = {
        "(Y+,Z-)": inner(y_plus, z_minus),
        "(Y-,Z+)": inner(y_minus, z_plus),
        "(Y+,Z+)": inner(y_plus, z_plus),
        "(Y-,Z-)": inner(y_minus, z_minus),
        "(Z+,Q')": inner(z_plus, qp),
        "(Z-,Q')": inner(z_minus, qp),
        "(Q',Y+')": inner(qp, derivative(y_plus, 1)),
    }
    # the essential-spectrum cluster excludes the three real members of the
    # point spectrum: e0, its -e0 partner, and the kernel eigenvalue near 0
    cluster = vals[~sel]
    cluster = np.delete(cluster, int(np.argmin(np.abs(cluster + e0))))
    cluster = np.delete(cluster, int(np.argmin(np.abs(cluster))))
    return SpectralData(
        ctx=ctx,
        e0=e0,
        mu=decay_rate_mu(e0),
        y_plus=y_plus,
        y_minus=y_minus,
        z_plus=z_plus,
        z_minus=z_minus,
        residual_plus=rel_residual(y_plus, +1),
        residual_minus=rel_residual(y_minus, -1),
        reflection_sign=refl_sign,
        certificate=cert,
        eigenvalues=vals,
        cluster_max_real=float(np.max(np.abs(cluster.real))) if cluster.size else 0.0,
    )


# --- shooting oracle ----------------------------------------------------------

def _ode_coeffs(p: int, e: float, x: float):
    q = float(eval_Q(p, x))
    qp = float(eval_Q_prime(p, x))
    m31 = e - p * (p - 1) * q ** (p - 2) * qp
    m32 = 1.0 - p * q ** (p - 1)
    return m31, m32


def _shoot_pieces(ctx: SolitonContext, e: float, rtol: float, x_match: float = 0.0,
                  dense: bool = False):
    """Integrate the eigen-ODE from both ends toward x_match.

    From the left: the single mode decaying as x -> -inf (rate sigma3).
    From the right: the two-dimensional decaying subspace, tracked through
    its wedge coordinates (w12, w13, w23); this keeps the integration real
    and well conditioned whether the slow pair is real or complex.
    """
    p = ctx.p
    half = ctx.grid.half_length / 2.0
    roots = cubic_roots(e)
    s3 = roots.sigma3

    def rhs_vec(x, y):
        m31, m32 = _ode_coeffs(p, e, x)
        return [y[1], y[2], m31 * y[0] + m32 * y[1]]

    def rhs_wedge(x, w):
        _, m32 = _ode_coeffs(p, e, x)
        m31, _ = _ode_coeffs(p, e, x)
        return [w[1], m32 * w[0] + w[2], -m31 * w[0]]

    y0 = np.array([1.0, s3, s3 * s3])
    left = solve_ivp(rhs_vec, (-half, x_match), y0, method="DOP853",
                     rtol=rtol, atol=1e-300, dense_output=dense)
    # wedge of the two decaying right modes: proportional to (1, s1+s2, s1*s2)
    ssum = -s3                      # the three roots sum to zero
    sprod = e / s3 if s3 != 0 else 0.0   # product of all roots equals lam
    w0 = np.array([1.0, ssum, sprod])
    right = solve_ivp(rhs_wedge, (half, x_match), w0, method="DOP853",
                      rtol=rtol, atol=1e-300, dense_output=dense)
    if not (left.success and right.success):
        raise ShootingError("eigen-ODE integration failed")
    return left, right


def _connection_det(ctx: SolitonContext, e: float, rtol: float) -> float:
    left, right = _shoot_pieces(ctx, e, rtol)
    y = left.y[:, -1]
    w = right.y[:, -1]
    scale = np.linalg.norm(y) * np.linalg.norm(w)
    return float((y[0] * w[2] - y[1] * w[1] + y[2] * w[0]) / scale)


def shoot_e0(ctx: SolitonContext, bracket: tuple, n_scan: int = 41,
             rtol: float = 1e-10) -> float:
    """Independent eigenvalue oracle: root of the connection determinant.

    Scans the bracket for a sign change of the matching determinant and
    refines it by Brent's method.
    """
    _require_unit_speed(ctx)
    lo, hi = bracket
    if not (0 < lo < hi):
        raise ValueError(f"bracket must satisfy 0 < lo < hi, got {bracket}")
    es = np.linspace(lo, hi, n_scan)
    ds = [_connection_det(ctx, float(e), rtol) for e in es]
    for i in range(n_scan - 1):
        if ds[i] == 0.0:
            return float(es[i])
        if ds[i] * ds[i + 1] < 0:
            return float(brentq(lambda e: _connection_det(ctx, e, rtol),
                                es[i], es[i + 1], xtol=1e-13, rtol=1e-14))
    raise ShootingError(f"no sign change of the connection determinant in {bracket}")


def connection_scan(ctx: SolitonContext, bracket: tuple, n_scan: int = 21,
                    rtol: float = 1e-8) -> np.ndarray:
    """Determinant values over a bracket (diagnostic; no-root certification)."""
    es = np.linspace(bracket[0], bracket[1], n_scan)
    return np.array([_connection_det(ctx, float(e), rtol) for e in es])


def shoot_eigenfunction(ctx: SolitonContext, e: float, rtol: float = 1e-10):
    """Eigenfunction samples on |x| <= L/2 reconstructed from the shooting.

    Returns (x, u) with u normalized to unit sup-norm. The left piece is the
    integrated decaying mode; the right piece integrates the two decaying
    modes backward and matches the combination at x = 0 in least squares.
    """
    p = ctx.p
    half = ctx.grid.half_length / 2.0
    left, _ = _shoot_pieces(ctx, e, rtol, dense=True)
    roots = cubic_roots(e)

    def rhs_c(x, y):
        m31, m32 = _ode_coeffs(p, e, x)
        return [y[1], y[2], m31 * y[0] + m32 * y[1]]

    sols = []
    for s in (roots.sigma1, roots.sigma2):
        y0 = np.array([1.0, s, s * s], dtype=complex)
        r = solve_ivp(rhs_c, (half, 0.0), y0, method="DOP853", rtol=rtol,
                      atol=1e-300, dense_output=True)
        if not r.success:
            raise ShootingError("eigen-ODE integration failed")
        sols.append(r)
    basis = np.column_stack([np.real(r.y[:, -1]) for r in sols]
                            + [np.imag(r.y[:, -1]) for r in sols])
    target = left.y[:, -1]
    coef, *_ = np.linalg.lstsq(basis, target, rcond=None)

    g = ctx.grid
    mask = np.abs(g.x) <= half
    xs = g.x[mask]
    u = np.empty(xs.size)
    for i, xv in enumerate(xs):
        if xv <= 0:
            u[i] = left.sol(xv)[0]
        else:
            vals = [s.sol(xv)[0] for s in sols]
            u[i] = (coef[0] * vals[0].real + coef[1] * vals[1].real
                    + coef[2] * vals[0].imag + coef[3] * vals[1].imag)
    u /= np.max(np.abs(u))
    return xs, u


# --- coercivity ----------------------------------------------------------------

def coercivity_sigma(ctx: SolitonContext, sd: SpectralData | None,
                     constraint_set: str = "adjoint") -> float:
    """Minimum of (Lv,v)/||v||_H1^2 over the constraint-orthogonal subspace.

    constraint_set: 'adjoint' -> {Z+, Z-, Q'}; 'classical' -> {Q^{(p+1)/2}, Q'};
    'none' -> unconstrained (indefinite; the minimum is negative).
    """
    _require_unit_speed(ctx)
    g = ctx.grid
    _, d2 = _diff_matrices(g)
    aq = l_matrix(ctx)
    bq = np.eye(g.n_points) - d2
    if constraint_set == "adjoint":
        if sd is None:
            raise ValueError("adjoint constraints need spectral data")
        cons = [sd.z_plus.values, sd.z_minus.values, ctx.Q_prime.values]
    elif constraint_set == "classical":
        cons = [ctx.Q.values ** ((ctx.p + 1) // 2) if (ctx.p + 1) % 2 == 0
                else ctx.Q.values ** ((ctx.p + 1) / 2.0), ctx.Q_prime.values]
    elif constraint_set == "none":
        cons = []
    else:
        raise ValueError(f"unknown constraint set {constraint_set!r}")
    if cons:
        c = np.vstack(cons)
        basis = sla.null_space(c)
        aq = basis.T @ aq @ basis
        bq = basis.T @ bq @ basis
    vals = sla.eigh(aq, bq, subset_by_index=[0, 0], eigvals_only=True)
    return float(vals[0])


# --- resolvent -----------------------------------------------------------------

_lu_cache: dict = {}


def resolvent_solve(ctx: SolitonContext, sd: SpectralData, rhs: GridFunction,
                    shift: float, gap_tol: float | None = None) -> GridFunction:
    """Solve (calL - shift) z = rhs by dense LU with a spectral-gap guard."""
    if gap_tol is None:
        gap_tol = 0.05 * sd.e0
    dist = float(np.min(np.abs(sd.eigenvalues - shift)))
    if dist <= gap_tol:
        raise NearSingularShiftError(
            f"shift {shift} is within {dist:.3e} of the computed spectrum "
            f"(tolerance {gap_tol:.3e})")
    key = (ctx.p, ctx.grid.half_length, ctx.grid.n_points, float(shift))
    lu = _lu_cache.get(key)
    if lu is None:
        a = lcal_matrix(ctx) - shift * np.eye(ctx.grid.n_points)
        lu = sla.lu_factor(a)
        _lu_cache[key] = lu
    z = sla.lu_solve(lu, rhs.values)
    zg = GridFunction(ctx.grid, z)
    res = apply_Lcal(ctx, zg) - shift * zg - rhs
    rhs_norm = math.sqrt(inner(rhs, rhs))
    if rhs_norm > 0 and math.sqrt(inner(res, res)) > 1e-9 * rhs_norm:
        raise NearSingularShiftError(
            f"resolvent residual {math.sqrt(inner(res, res)):.3e} exceeds "
            f"1e-9 * ||rhs|| = {1e-9 * rhs_norm:.3e} at shift {shift}")
    return zg
