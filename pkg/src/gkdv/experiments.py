"""Scenario drivers assembling the modules into acceptance-ready experiments.

Each scenario returns an ExperimentReport with measured quantities, explicit
pass/fail checks at declared tolerances, and the conservation gate: any
functional drift above DRIFT_GATE marks the report invalid outright.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .evolve import EvolveConfig, Trajectory, conservation_report, run, run_backward
from .fitting import FitResult, fit_log_slope
from .grid import GridFunction, derivative, hs_norm, inner
from .linop import SpectralData
from .modulation import (ModulationTrack, jprime_check, make_zeta,
                         track_trajectory, tube_distance)
from .profiles import SolitonContext, functionals, instability_data
from .series import build_series, series_eval

DRIFT_GATE = 1e-7


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


@dataclass
class ExperimentReport:
    scenario: str
    config: dict
    measured: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    conservation: dict = field(default_factory=dict)
    valid: bool = True
    notes: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    trajectory: Trajectory | None = field(default=None, repr=False)

    def add_check(self, name, passed, value, tolerance, detail=""):
        self.checks.append(Check(name, bool(passed), float(value),
                                 float(tolerance), detail))

    def gate_conservation(self, drifts: dict):
        for k, v in drifts.items():
            prev = self.conservation.get(k, 0.0)
            self.conservation[k] = max(prev, v)
        if any(v > DRIFT_GATE for v in self.conservation.values()):
            self.valid = False

    @property
    def passed(self) -> bool:
        return self.valid and all(c.passed for c in self.checks)


def _require_supercritical(ctx: SolitonContext):
    if not ctx.supercritical:
        raise ValueError(f"experiments require p > 5, got p={ctx.p}")


# --- instability -----------------------------------------------------------------

def evolve_until_exit(ctx: SolitonContext, u0: GridFunction, delta: float,
                      horizon: float, dt: float, sample_dt: float = 0.01,
                      chunk: float = 0.25, margin: float = 1.6) -> Trajectory:
    """Chunked forward evolution stopping shortly after the tube exit.

    Post-exit states focus rapidly (amplitude growth consistent with the
    supercritical instability), so integration stops at margin*delta to keep
    every recorded sample clean.
    """
    record_every = max(1, int(round(sample_dt / dt)))
    times, states, funcs = [], [], []
    u = u0
    t_acc = 0.0
    status = "completed"
    while t_acc < horizon:
        t_end = min(chunk, horizon - t_acc)
        cfg = EvolveConfig(dt=dt, t_end=t_end, frame="co-moving",
                           record_every=record_every)
        traj = run(u, cfg, ctx)
        off = 1 if times else 0
        for i in range(off, len(traj.times)):
            times.append(t_acc + traj.times[i])
            states.append(traj.states[i])
            funcs.append(traj.functionals[i])
        status = traj.status
        if traj.status != "completed":
            break
        u = traj.final
        t_acc += traj.times[-1]
        if tube_distance(traj.final, ctx)[0] > margin * delta:
            break
    return Trajectory(grid=ctx.grid, times=np.array(times), states=states,
                      functionals=funcs, status=status,
                      meta={"frame": "co-moving", "frame_speed": 1.0, "dt": dt,
                            "record_every": record_every})


def first_exit_time(traj: Trajectory, ctx: SolitonContext, delta: float):
    """First sample time with tube distance beyond delta, or None (censored)."""
    for i, t in enumerate(traj.times):
        d, _ = tube_distance(traj.state(i), ctx)
        if d > delta:
            return float(t)
    return None


def run_instability(ctx: SolitonContext, sd: SpectralData, n_list=(5, 10, 20),
                    sign: int = 1, delta_factor: float = 0.2,
                    horizon: float = 30.0, dt: float = 1e-4,
                    jprime_n: int | None = 10) -> ExperimentReport:
    """Tube-exit times for the unstable family, with virial and tail reports."""
    _require_supercritical(ctx)
    delta = delta_factor * hs_norm(ctx.Q, 1)
    rep = ExperimentReport("instability", {
        "n_list": list(n_list), "sign": sign, "delta": delta,
        "delta_factor": delta_factor, "horizon": horizon, "dt": dt,
        "N": ctx.grid.n_points, "L": ctx.grid.half_length, "p": ctx.p})
    fq = ctx.functionals_Q
    zp = make_zeta(ctx)
    exit_times: dict = {}
    for n in n_list:
        u0 = instability_data(ctx, n, sign)
        f0 = functionals(u0, ctx)
        rep.add_check(f"mass_equals_soliton_n{n}",
                      abs(f0.mass - fq.mass) / fq.mass <= 1e-10,
                      abs(f0.mass - fq.mass) / fq.mass, 1e-10)
        rep.add_check(f"energy_below_soliton_n{n}", f0.energy < fq.energy,
                      f0.energy - fq.energy, 0.0)
        traj = evolve_until_exit(ctx, u0, delta, horizon, dt)
        drifts = conservation_report(traj)
        rep.gate_conservation(drifts)
        t_exit = first_exit_time(traj, ctx, delta)
        exit_times[n] = t_exit
        rep.measured[f"T_{n}"] = t_exit
        if t_exit is None:
            rep.notes.append(f"n={n}: censored (no exit within horizon {horizon})")
        if jprime_n is not None and n == jprime_n:
            track = track_trajectory(traj, ctx, sd, zp=zp)
            rep.measured["jprime_samples"] = int(track.data.shape[0])
            if track.data.shape[0] >= 10:
                jp = jprime_check(track, zp)
                rep.measured["jprime_C"] = jp.fitted_C
                rep.measured["a_sign"] = jp.a_sign
                rep.add_check("a_keeps_sign", jp.sign_fraction == 1.0,
                              jp.sign_fraction, 1.0)
                rep.add_check("J_monotone", jp.j_monotone, 1.0 if jp.j_monotone else 0.0, 1.0)
                sup = tail_bound_sup(track)
                rep.measured["tail_bound_sup"] = sup
                rep.add_check("tail_bound_finite", math.isfinite(sup), sup, math.inf)
    measured = [exit_times[n] for n in n_list]
    if all(t is not None for t in measured):
        ordered = all(a < b for a, b in zip(measured, measured[1:]))
        rep.add_check("exit_times_increasing", ordered, 0.0, 0.0,
                      detail=str(measured))
    return rep


def tail_bound_sup(track: ModulationTrack) -> float:
    """sup over samples and offsets of tail_mass * e^{x0/4}."""
    from .modulation import TRACK_OFFSETS

    sup = 0.0
    for i, x0 in enumerate(TRACK_OFFSETS):
        col = track.data[:, track.data.shape[1] - len(TRACK_OFFSETS) + i]
        sup = max(sup, float(np.max(col)) * math.exp(x0 / 4.0))
    return sup


# --- special solutions -------------------------------------------------------------

def default_t0(sd: SpectralData) -> float:
    return 6.0 / sd.e0


def run_special(ctx: SolitonContext, sd: SpectralData, A: float,
                k_max: int = 3, t0: float | None = None,
                horizon: float | None = None, dt: float = 1e-4,
                sample_dt: float = 0.01, slope_bound_factor: float = -1.9
                ) -> ExperimentReport:
    """Forward evolution of Q + V_k(t0): e^{-2 e0 t} convergence check.

    r(t) = ||u(t) - Q - A e^{-e0 t} Y+||_H1 must decay with log-slope at most
    slope_bound_factor * e0 over the recorded window (floor excluded).
    """
    _require_supercritical(ctx)
    e0 = sd.e0
    if t0 is None:
        t0 = default_t0(sd)
    if horizon is None:
        horizon = 6.0 / e0
    rep = ExperimentReport("special", {
        "A": A, "k_max": k_max, "t0": t0, "horizon": horizon, "dt": dt,
        "N": ctx.grid.n_points, "L": ctx.grid.half_length, "p": ctx.p})
    v, _ = build_series(ctx, sd, A, k_max)
    v_t0 = series_eval(v, t0)
    v_norm = hs_norm(v_t0, 1)
    rep.measured["series_t0_h1"] = v_norm
    if v_norm > 0.1:
        raise ValueError(f"t0={t0} too early: ||V_k(t0)||_H1 = {v_norm:.3f} > 0.1")
    u0 = ctx.Q + v_t0
    record_every = max(1, int(round(sample_dt / dt)))
    cfg = EvolveConfig(dt=dt, t_end=horizon, frame="co-moving",
                       record_every=record_every)
    traj = run(u0, cfg, ctx)
    rep.gate_conservation(conservation_report(traj))
    if traj.status != "completed":
        rep.valid = False
        rep.notes.append(f"run ended with status {traj.status}")
        return rep
    if A == 0.0:
        sup = max(float(np.max(np.abs(traj.states[i] - ctx.Q.values)))
                  for i in range(len(traj.times)))
        rep.measured["sup_deviation"] = sup
        rep.add_check("soliton_stationary", sup <= 1e-6, sup, 1e-6)
        return rep
    ts = t0 + traj.times
    rs = np.array([hs_norm(traj.state(i)
                           - (ctx.Q + (A * math.exp(-e0 * (t0 + tau))) * sd.y_plus), 1)
                   for i, tau in enumerate(traj.times)])
    fit = fit_log_slope(ts, rs)
    rep.measured["r_initial"] = float(rs[0])
    rep.measured["r_min"] = float(np.min(rs))
    rep.measured["slope_over_e0"] = fit.slope / e0
    rep.measured["fit_window"] = list(fit.window)
    rep.measured["fit_rms"] = fit.rms_residual
    rep.add_check("second_order_rate", fit.slope <= slope_bound_factor * e0,
                  fit.slope / e0, slope_bound_factor)
    # diagnostic: amplitude recovered from the unstable-dual projection
    track = track_trajectory(traj, ctx, sd, t_offset=t0, zp=make_zeta(ctx))
    if track.data.shape[0] >= 10:
        tt = track.column("t")
        am = track.column("alpha_minus")
        half = track.data.shape[0] // 2
        a_fit = float(np.median(np.exp(e0 * tt[:half]) * am[:half]))
        rep.measured["A_fitted_from_alpha_minus"] = a_fit
    rep.trajectory = traj
    return rep


def order_convergence(ctx: SolitonContext, sd: SpectralData, A: float = 1.0,
                      k_range=(2, 3, 4), t0: float | None = None,
                      delta_t: float | None = None, dt: float = 1e-4) -> dict:
    """Per-order decay factors of the state-minus-series defect.

    One trajectory, evaluated against V_k for each k: the ratio
    rho_k = ||u - Q - V_k||(t0+dt) / ||u - Q - V_k||(t0) should gain a factor
    close to e^{-e0 delta_t} per unit increase of k.
    """
    e0 = sd.e0
    if t0 is None:
        t0 = 3.0 / e0
    if delta_t is None:
        delta_t = 1.0 / e0
    k_top = max(k_range)
    v_top, _ = build_series(ctx, sd, A, k_top)
    u0 = ctx.Q + series_eval(v_top, t0)
    cfg = EvolveConfig(dt=dt, t_end=delta_t, frame="co-moving",
                       record_every=max(1, int(round(delta_t / dt))))
    traj = run(u0, cfg, ctx)
    out = {"t0": t0, "delta_t": delta_t, "rho": {}, "per_order_factor": {}}
    rhos = {}
    for k in k_range:
        v_k, _ = build_series(ctx, sd, A, k)
        d0 = hs_norm(traj.state(0) - (ctx.Q + series_eval(v_k, t0)), 1)
        d1 = hs_norm(traj.final - (ctx.Q + series_eval(v_k, t0 + delta_t)), 1)
        rhos[k] = d1 / d0
        out["rho"][k] = rhos[k]
    ks = sorted(rhos)
    for a, b in zip(ks, ks[1:]):
        out["per_order_factor"][f"{a}->{b}"] = rhos[b] / rhos[a]
    out["target_factor"] = math.exp(-e0 * delta_t)
    return out


# --- gradient dichotomy --------------------------------------------------------------

def gradient_gap(u: GridFunction, ctx: SolitonContext) -> float:
    """||u_x||^2 - ||Q'||^2."""
    ux = derivative(u, 1)
    return inner(ux, ux) - inner(ctx.Q_prime, ctx.Q_prime)


def run_gradient_sign(ctx: SolitonContext, sd: SpectralData, A_list=(1.0, -1.0, 0.0),
                      k_max: int = 3, t0: float | None = None,
                      horizon_fwd: float | None = None,
                      horizon_bwd: float | None = None, dt: float = 1e-4,
                      sample_dt: float = 0.05) -> ExperimentReport:
    """sign(||u_x||^2 - ||Q'||^2) must equal sign(A) at every sample.

    Backward runs use the x -> -x, t -> -t symmetry and are attempted for
    A <= 0 only; a backward blow-up for A > 0 would be an observation, not a
    failure, so it is skipped by default.
    """
    _require_supercritical(ctx)
    e0 = sd.e0
    if t0 is None:
        t0 = default_t0(sd)
    if horizon_fwd is None:
        horizon_fwd = 6.0 / e0
    if horizon_bwd is None:
        horizon_bwd = 10.0 / e0
    rep = ExperimentReport("gradient-sign", {
        "A_list": list(A_list), "k_max": k_max, "t0": t0,
        "horizon_fwd": horizon_fwd, "horizon_bwd": horizon_bwd, "dt": dt,
        "N": ctx.grid.n_points, "L": ctx.grid.half_length, "p": ctx.p})
    record_every = max(1, int(round(sample_dt / dt)))
    for A in A_list:
        v, _ = build_series(ctx, sd, A, k_max)
        u0 = ctx.Q + series_eval(v, t0)
        legs = [("fwd", horizon_fwd, run)]
        if A <= 0:
            legs.append(("bwd", horizon_bwd, run_backward))
        for tag, hor, runner in legs:
            cfg = EvolveConfig(dt=dt, t_end=hor, frame="co-moving",
                               record_every=record_every)
            traj = runner(u0, cfg, ctx)
            rep.gate_conservation(conservation_report(traj))
            if traj.status != "completed":
                rep.notes.append(f"A={A} {tag}: status {traj.status} (observation)")
                continue
            gaps = np.array([gradient_gap(traj.state(i), ctx)
                             for i in range(len(traj.times))])
            if A == 0.0:
                worst = float(np.max(np.abs(gaps)))
                rep.add_check(f"gap_zero_A0_{tag}", worst <= 1e-8, worst, 1e-8)
            else:
                agree = np.sign(gaps) == np.sign(A)
                frac = float(np.mean(agree))
                rep.measured[f"min_|gap|_A{A}_{tag}"] = float(np.min(np.abs(gaps)))
                rep.add_check(f"sign_matches_A{A}_{tag}", frac == 1.0, frac, 1.0)
    return rep


# --- scaling family ----------------------------------------------------------------

def _fourier_eval(u: GridFunction, pts: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of u at arbitrary points."""
    from scipy import fft as sfft

    g = u.grid
    uh = sfft.rfft(u.values)
    uh[-1] = 0.0
    k = g.k[: g.n_points // 2 + 1]
    # f(x) = (1/N) [c0 + 2 sum Re(c_j e^{i k_j (x+L)})]
    phase = np.exp(1j * np.outer(pts + g.half_length, k[1:]))
    vals = (uh[0].real + 2.0 * np.real(phase @ uh[1:])) / g.n_points
    return vals


def scaled_initial_state(ctx: SolitonContext, sd: SpectralData, A: float,
                         k_max: int, t0: float, c: float) -> GridFunction:
    """c^{1/(p-1)} [Q + V_k(t0)](sqrt(c) x) sampled on the grid."""
    v, _ = build_series(ctx, sd, A, k_max)
    prof = ctx.Q + series_eval(v, t0)
    pts = math.sqrt(c) * ctx.grid.x
    vals = c ** (1.0 / (ctx.p - 1)) * _fourier_eval(prof, pts)
    return GridFunction(ctx.grid, vals)


def run_scaling(ctx: SolitonContext, sd: SpectralData, c: float = 2.0,
                A: float = 1.0, k_max: int = 3, t0: float | None = None,
                horizon_units: float = 5.0, dt: float = 1e-4,
                sample_dt: float = 0.01) -> ExperimentReport:
    """Decay rate of ||u(t, .+ct) - Q_c||_H1 must scale like c^{3/2}."""
    from .profiles import eval_Qc

    _require_supercritical(ctx)
    e0 = sd.e0
    if t0 is None:
        t0 = default_t0(sd)
    rep = ExperimentReport("scaling", {
        "c": c, "A": A, "k_max": k_max, "t0": t0, "dt": dt,
        "horizon_units": horizon_units, "N": ctx.grid.n_points,
        "L": ctx.grid.half_length, "p": ctx.p})
    record_every = max(1, int(round(sample_dt / dt)))
    rates = {}
    for speed in (1.0, c):
        t0_c = t0 / speed**1.5
        horizon = horizon_units / (e0 * speed**1.5)
        u0 = scaled_initial_state(ctx, sd, A, k_max, t0, speed)
        qc = GridFunction(ctx.grid, eval_Qc(ctx.p, speed, ctx.grid.x))
        cfg = EvolveConfig(dt=dt, t_end=horizon, frame="co-moving",
                           frame_speed=speed, record_every=record_every)
        traj = run(u0, cfg, ctx)
        rep.gate_conservation(conservation_report(traj))
        rs = np.array([hs_norm(traj.state(i) - qc, 1)
                       for i in range(len(traj.times))])
        fit = fit_log_slope(t0_c + traj.times, rs)
        rates[speed] = -fit.slope
        rep.measured[f"rate_c{speed}"] = -fit.slope
        rep.measured[f"fit_window_c{speed}"] = list(fit.window)
    ratio = rates[c] / rates[1.0]
    rep.measured["rate_ratio"] = ratio
    rep.measured["target_ratio"] = c**1.5
    rep.add_check("rate_ratio_c32", abs(ratio / c**1.5 - 1.0) <= 0.05,
                  ratio, c**1.5)
    return rep


# --- classification shift -------------------------------------------------------------

def run_classification_shift(ctx: SolitonContext, sd: SpectralData, A: float,
                             k_max: int = 3, tol: float = 1e-9) -> ExperimentReport:
    """Coefficient-wise homogeneity Z_j^A = A^j Z_j^1 (the time-shift identity).

    For A > 0 the shift t_A = -ln A / e0 turns U^A into U^1 up to translation;
    at series level that is exactly index-j homogeneity of degree j in A.
    """
    _require_supercritical(ctx)
    if A == 0:
        raise ValueError("classification shift needs A != 0")
    rep = ExperimentReport("classification-shift", {
        "A": A, "k_max": k_max, "tol": tol, "N": ctx.grid.n_points,
        "L": ctx.grid.half_length, "p": ctx.p})
    base = 1.0 if A > 0 else -1.0
    t_shift = -math.log(abs(A)) / sd.e0
    rep.measured["t_A"] = t_shift
    v_a, _ = build_series(ctx, sd, A, k_max)
    v_1, _ = build_series(ctx, sd, base, k_max)
    worst = 0.0
    for j in v_a.indices:
        za = v_a.coefficient(j).values
        zb = abs(A) ** j * v_1.coefficient(j).values
        denom = float(np.max(np.abs(zb)))
        rel = float(np.max(np.abs(za - zb))) / denom if denom > 0 else 0.0
        rep.measured[f"rel_diff_j{j}"] = rel
        worst = max(worst, rel)
    rep.add_check("series_homogeneity", worst <= tol, worst, tol)
    return rep


# --- worker pool -----------------------------------------------------------------------

def run_many(jobs: dict, max_workers: int = 2) -> dict:
    """Execute named scenario callables concurrently; merge by sorted name."""
    results = {}
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {name: pool.submit(fn) for name, fn in jobs.items()}
        for name in sorted(futures):
            results[name] = futures[name].result()
    return results
