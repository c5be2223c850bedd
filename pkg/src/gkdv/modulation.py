"""Decomposition of a state near the soliton: center, defect, projections.

The modulation center a(u) is the shift making eps = u(.+a) - Q orthogonal
to Q'; the projections alpha± = (eps, Z±) track the stable/unstable
components of the linearized flow. The virial functional J = (eps, zeta)
drives the instability diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .evolve import Trajectory
from .grid import GridFunction, derivative, hs_norm, inner, shift
from .linop import SpectralData
from .profiles import SolitonContext, functionals


class ModulationError(RuntimeError):
    """Newton centering stagnated or the state left the soliton tube."""


DEFAULT_TUBE_ENTRY_FACTOR = 0.3   # modulation admitted below this * ||Q||_H1


def tube_distance(u: GridFunction, ctx: SolitonContext) -> tuple:
    """(inf_y ||u - Q(.-y)||_H1, argmin y): coarse scan plus Newton refinement."""
    g = u.grid
    n = g.n_points
    kfull = np.fft.fftfreq(n, d=1.0 / n) * (math.pi / g.half_length)
    uh = np.fft.fft(u.values)
    qh = np.fft.fft(ctx.Q.values)
    w = 1.0 + kfull**2
    c = w * uh * np.conj(qh) * (2.0 * g.half_length / n**2)
    corr = np.real(np.fft.ifft(c)) * n          # C(y_m) over all grid shifts
    nu2 = hs_norm(u, 1) ** 2
    nq2 = hs_norm(ctx.Q, 1) ** 2
    m0 = int(np.argmax(corr))
    y = g.x[m0] + g.half_length  # shift values: y_m = m*dx maps to x-grid offset
    y = float(g.dx * m0)
    # Newton iterations on C'(y) = 0
    for _ in range(8):
        ph = np.exp(1j * kfull * y)
        c1 = float(np.real(np.sum(1j * kfull * c * ph)))
        c2 = float(np.real(np.sum(-(kfull**2) * c * ph)))
        if c2 >= 0 or c2 == 0:
            break
        step = c1 / c2
        y -= step
        if abs(step) < 1e-14 * max(1.0, abs(y)):
            break
    cbest = float(np.real(np.sum(c * np.exp(1j * kfull * y))))
    d2 = max(nu2 + nq2 - 2.0 * cbest, 0.0)
    # wrap the shift into [-L, L)
    L = g.half_length
    y = (y + L) % (2 * L) - L
    return math.sqrt(d2), y


def center(u: GridFunction, ctx: SolitonContext, guess: float | None = None,
           tube_factor: float = DEFAULT_TUBE_ENTRY_FACTOR,
           check_tube: bool = True) -> float:
    """Newton solve of (u(.+a) - Q, Q') = 0 with Fourier-shift translation."""
    qp = ctx.Q_prime
    if guess is None or check_tube:
        dist, argmin = tube_distance(u, ctx)
        if check_tube and dist > tube_factor * hs_norm(ctx.Q, 1):
            raise ModulationError(
                f"state outside the soliton tube: distance {dist:.3e} exceeds "
                f"{tube_factor} * ||Q||_H1")
        if guess is None:
            guess = argmin
    a = float(guess)
    scale = max(1.0, hs_norm(u, 1))
    for _ in range(60):
        ua = shift(u, a)
        g = inner(ua, qp) - inner(ctx.Q, qp)   # (Q, Q') = 0 identically
        if abs(g) <= 1e-13 * scale:
            return a
        dg = inner(derivative(ua, 1), qp)
        if dg == 0:
            raise ModulationError("degenerate Newton derivative in centering")
        a -= g / dg
    ua = shift(u, a)
    g = inner(ua, qp)
    if abs(g) <= 1e-11:
        return a
    raise ModulationError(f"centering Newton stagnated, |(eps,Q')| = {abs(g):.3e}")


def decompose(u: GridFunction, sd: SpectralData, ctx: SolitonContext,
              guess: float | None = None, check_tube: bool = True) -> tuple:
    """(eps, alpha+, alpha-) with eps = u(.+a) - Q and alpha± = (eps, Z±)."""
    a = center(u, ctx, guess, check_tube=check_tube)
    eps = shift(u, a) - ctx.Q
    return eps, inner(eps, sd.z_plus), inner(eps, sd.z_minus)


# --- virial machinery ----------------------------------------------------------

@dataclass(frozen=True)
class ZetaProfile:
    """zeta(x) = int_{-L}^x (S + beta Q^{(p+1)/2}), with beta killing (Q, zeta')."""

    beta: float
    lambda0: float
    zeta: GridFunction
    phi: GridFunction            # Q^{(p+1)/2}


def make_zeta(ctx: SolitonContext) -> ZetaProfile:
    p = ctx.p
    g = ctx.grid
    phi = GridFunction(g, ctx.Q.values ** ((p + 1) / 2.0))
    s = ctx.S
    beta = -inner(ctx.Q, s) / inner(ctx.Q, phi)
    integrand = s.values + beta * phi.values
    zeta = cumulative_trapezoid(integrand, g.x, initial=0.0)
    lam0 = 0.25 * (p - 1) * (p + 3)
    return ZetaProfile(beta=beta, lambda0=lam0,
                       zeta=GridFunction(g, zeta), phi=phi)


def virial_J(eps: GridFunction, ctx: SolitonContext,
             zp: ZetaProfile | None = None) -> float:
    """J = (eps, zeta)."""
    if zp is None:
        zp = make_zeta(ctx)
    return inner(eps, zp.zeta)


def tail_mass(u: GridFunction, x_center: float, offsets) -> np.ndarray:
    """int_{x > x0} (v^2 + v_x^2) dx for v = u(. + x_center), per offset x0."""
    v = shift(u, x_center)
    vx = derivative(v, 1)
    dens = v.values**2 + vx.values**2
    g = u.grid
    out = np.empty(len(offsets))
    for i, x0 in enumerate(offsets):
        out[i] = g.dx * float(np.sum(dens[g.x > x0]))
    return out


# --- trajectory tracking ---------------------------------------------------------

TRACK_COLUMNS = ("t", "x", "eps_h1", "alpha_plus", "alpha_minus",
                 "mass", "energy", "weinstein", "J", "a_virial",
                 "tail_2", "tail_4", "tail_8", "tail_16")

TRACK_OFFSETS = (2.0, 4.0, 8.0, 16.0)


@dataclass
class ModulationTrack:
    """Per-sample modulation record along one trajectory.

    Columns follow TRACK_COLUMNS; x is the lab-frame center. Tracking stops
    at the first modulation failure, recorded in `stop_reason`.
    """

    ctx: SolitonContext
    data: np.ndarray                    # shape (n_samples, len(TRACK_COLUMNS))
    orthogonality_max: float
    stop_reason: str = "completed"
    stop_time: float | None = None
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.data[:, TRACK_COLUMNS.index(name)]


def track_trajectory(traj: Trajectory, ctx: SolitonContext, sd: SpectralData,
                     t_offset: float = 0.0,
                     zp: ZetaProfile | None = None,
                     tube_factor: float = DEFAULT_TUBE_ENTRY_FACTOR) -> ModulationTrack:
    """Modulation decomposition at every snapshot, with Newton continuation.

    The trajectory's co-moving drift is folded into the lab-frame center
    x(t) = speed * t + a_frame(t).
    """
    if zp is None:
        zp = make_zeta(ctx)
    speed = traj.meta.get("frame_speed", 1.0) if traj.meta.get("frame") == "co-moving" else 0.0
    qp = ctx.Q_prime
    qp_norm = math.sqrt(inner(qp, qp))
    rows = []
    guess = None
    ortho_max = 0.0
    stop_reason = "completed"
    stop_time = None
    for i, tau in enumerate(traj.times):
        u = traj.state(i)
        try:
            a = center(u, ctx, guess, tube_factor=tube_factor)
        except ModulationError as exc:
            stop_reason = f"modulation-failure: {exc}"
            stop_time = float(tau + t_offset)
            break
        guess = a
        eps = shift(u, a) - ctx.Q
        eps_h1 = hs_norm(eps, 1)
        ortho = abs(inner(eps, qp))
        if eps_h1 > 0:
            ortho_max = max(ortho_max, ortho / (eps_h1 * qp_norm))
        f = traj.functionals[i]
        tails = tail_mass(u, a, TRACK_OFFSETS)
        rows.append([tau + t_offset, speed * tau + a, eps_h1,
                     inner(eps, sd.z_plus), inner(eps, sd.z_minus),
                     f.mass, f.energy, f.weinstein,
                     inner(eps, zp.zeta), inner(eps, zp.phi), *tails])
    data = np.array(rows) if rows else np.empty((0, len(TRACK_COLUMNS)))
    return ModulationTrack(ctx=ctx, data=data, orthogonality_max=ortho_max,
                           stop_reason=stop_reason, stop_time=stop_time,
                           meta={"t_offset": t_offset, "frame_speed": speed,
                                 "beta": zp.beta})


def fd_derivative(t: np.ndarray, y: np.ndarray) -> tuple:
    """4th-order centered first derivative on a uniform sample grid.

    Returns (t_interior, dy/dt) discarding two samples at each end.
    """
    h = t[1] - t[0]
    if not np.allclose(np.diff(t), h, rtol=1e-8):
        raise ValueError("finite differences need uniform sampling")
    d = (y[:-4] - 8.0 * y[1:-3] + 8.0 * y[3:-1] - y[4:]) / (12.0 * h)
    return t[2:-2], d


@dataclass(frozen=True)
class JPrimeReport:
    fitted_C: float
    sign_fraction: float        # fraction of post-transient samples with sign(a) = majority
    j_monotone: bool
    a_sign: int
    window: tuple


def jprime_check(track: ModulationTrack, zp: ZetaProfile,
                 transient_frac: float = 0.1) -> JPrimeReport:
    """Compare finite-difference J' with beta*lambda0*a(t).

    a(t) = (eps, Q^{(p+1)/2}); the remainder J' - beta lambda0 a must be
    dominated by C ||eps||_H1^2 with a stable fitted C, a(t) holds one sign
    after the transient, and J is monotone with that sign on the window.
    """
    t = track.column("t")
    jvals = track.column("J")
    eps_h1 = track.column("eps_h1")
    a_vals = track.column("a_virial")
    if t.size < 10:
        raise ValueError("track too short for the J' diagnostic")
    ti, jp = fd_derivative(t, jvals)
    a_i = a_vals[2:-2]
    eps_i = eps_h1[2:-2]
    remainder = jp - zp.beta * zp.lambda0 * a_i
    fitted_c = float(np.max(np.abs(remainder) / np.maximum(eps_i**2, 1e-300)))
    i0 = int(transient_frac * a_vals.size)
    post = a_vals[i0:]
    sign = 1 if np.median(np.sign(post[post != 0])) >= 0 else -1
    frac = float(np.mean(np.sign(post) == sign))
    jpost = jvals[i0:]
    dj = np.diff(jpost) * sign
    mono = bool(np.all(dj > -1e-12 * max(1.0, float(np.max(np.abs(jpost))))))
    return JPrimeReport(fitted_C=fitted_c, sign_fraction=frac, j_monotone=mono,
                        a_sign=sign, window=(float(t[i0]), float(t[-1])))
