"""Run configuration, persistence and export formats.

Config files are flat INI-style key=value text with one section per module;
environment variables with the GKDV_ prefix (GKDV_<SECTION>_<KEY>) override
file values, and command-line flags override both. All numeric text output
uses 17 significant digits so reruns are byte-comparable.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import io as _io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid, GridFunction
from .linop import SpectralData
from .profiles import SolitonContext

FLOAT_FMT = "%.17g"

SCENARIOS = ("special", "instability", "gradient-sign", "scaling",
             "classification-shift")


class ConfigError(ValueError):
    """A run configuration violated a module precondition."""


@dataclass
class RunConfig:
    p: int = 6
    c: float = 1.0
    L: float = 40.0
    N: int = 1024
    dt: float = 1e-4
    scenario: str = "special"
    A: float = 1.0
    k_max: int = 3
    n_list: tuple = (5, 10, 20)
    sign: int = 1
    delta_factor: float = 0.2
    t0: float | None = None
    horizon: float | None = None
    out_dir: str = "runs"

    def validate(self):
        if int(self.p) != self.p or self.p < 2:
            raise ConfigError(f"violated: p integer >= 2 (got {self.p})")
        if self.c <= 0:
            raise ConfigError(f"violated: c > 0 (got {self.c})")
        if self.L <= 0:
            raise ConfigError(f"violated: L > 0 (got {self.L})")
        if self.N < 16 or self.N % 2:
            raise ConfigError(f"violated: N even and >= 16 (got {self.N})")
        if self.dt <= 0:
            raise ConfigError(f"violated: dt > 0 (got {self.dt})")
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"violated: scenario in {SCENARIOS} (got {self.scenario!r})")
        if self.k_max < 1:
            raise ConfigError(f"violated: k_max >= 1 (got {self.k_max})")
        if any(n < 1 for n in self.n_list):
            raise ConfigError(f"violated: n >= 1 in n_list (got {self.n_list})")
        if self.sign not in (1, -1):
            raise ConfigError(f"violated: sign in {{+1,-1}} (got {self.sign})")
        if self.delta_factor <= 0:
            raise ConfigError(f"violated: delta_factor > 0 (got {self.delta_factor})")
        return self

    def require_supercritical(self):
        if self.p <= 5:
            raise ConfigError(
                f"violated: p > 5 required for experiments (got p={self.p})")


_SECTIONS = {
    "soliton": ("p", "c"),
    "grid": ("L", "N"),
    "evolve": ("dt",),
    "scenario": ("scenario", "A", "k_max", "n_list", "sign", "delta_factor",
                 "t0", "horizon"),
    "output": ("out_dir",),
}

_INT_FIELDS = {"p", "N", "k_max", "sign"}
_OPTIONAL_FLOAT = {"t0", "horizon"}


def config_to_text(cfg: RunConfig) -> str:
    cp = configparser.ConfigParser()
    for section, keys in _SECTIONS.items():
        cp[section] = {}
        for key in keys:
            val = getattr(cfg, key)
            if val is None:
                cp[section][key] = "none"
            elif key == "n_list":
                cp[section][key] = ",".join(str(int(n)) for n in val)
            elif isinstance(val, float):
                cp[section][key] = FLOAT_FMT % val
            else:
                cp[section][key] = str(val)
    buf = _io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def config_from_text(text: str, env: dict | None = None) -> RunConfig:
    cp = configparser.ConfigParser()
    cp.read_string(text)
    if env is None:
        env = os.environ
    kwargs = {}
    for section, keys in _SECTIONS.items():
        for key in keys:
            raw = None
            if cp.has_option(section, key):
                raw = cp.get(section, key)
            override = env.get(f"GKDV_{section.upper()}_{key.upper()}")
            if override is not None:
                raw = override
            if raw is None:
                continue
            kwargs[key] = _parse_value(key, raw)
    return RunConfig(**kwargs).validate()


def _parse_value(key, raw):
    raw = raw.strip()
    if key == "n_list":
        return tuple(int(s) for s in raw.split(",") if s.strip())
    if key in _OPTIONAL_FLOAT:
        return None if raw.lower() == "none" else float(raw)
    if key in _INT_FIELDS:
        return int(raw)
    if key in ("scenario", "out_dir"):
        return raw
    return float(raw)


# --- atomic writes and export formats -------------------------------------------

def atomic_write(path, data):
    """Write text or bytes via a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return repr(obj)


def write_json(path, obj):
    atomic_write(path, json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, columns, rows):
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(FLOAT_FMT % v for v in row))
    atomic_write(path, "\n".join(lines) + "\n")


def write_field_csv(path, grid: Grid, named_values: dict):
    cols = ["x"] + list(named_values)
    rows = np.column_stack([grid.x] + [np.asarray(v) for v in named_values.values()])
    write_csv(path, cols, rows)


def report_payload(report) -> dict:
    payload = {
        "scenario": report.scenario,
        "config": report.config,
        "measured": report.measured,
        "checks": [dataclasses.asdict(c) for c in report.checks],
        "conservation": report.conservation,
        "valid": report.valid,
        "passed": report.passed,
        "notes": report.notes,
        "artifacts": report.artifacts,
    }
    return payload


# --- spectral cache ----------------------------------------------------------------

def spectrum_cache_key(p: int, L: float, N: int, imag_tol_factor: float = 1e-8,
                       real_tol: float | None = None) -> str:
    text = f"p={p};L={FLOAT_FMT % L};N={N};imag={imag_tol_factor!r};real={real_tol!r}"
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def save_spectrum(sd: SpectralData, directory) -> Path:
    directory = Path(directory)
    key = spectrum_cache_key(sd.ctx.p, sd.grid.half_length, sd.grid.n_points)
    meta = {
        "p": sd.ctx.p, "c": sd.ctx.c, "L": sd.grid.half_length,
        "N": sd.grid.n_points, "e0": sd.e0, "mu": sd.mu,
        "residual_plus": sd.residual_plus, "residual_minus": sd.residual_minus,
        "reflection_sign": sd.reflection_sign,
        "certificate": sd.certificate,
        "cluster_max_real": sd.cluster_max_real,
    }
    write_json(directory / f"spectrum_{key}.json", meta)
    buf = _io.BytesIO()
    np.savez(buf, y_plus=sd.y_plus.values, y_minus=sd.y_minus.values,
             z_plus=sd.z_plus.values, z_minus=sd.z_minus.values,
             eigenvalues=sd.eigenvalues)
    atomic_write(directory / f"spectrum_{key}.npz", buf.getvalue())
    return directory / f"spectrum_{key}.json"


def load_spectrum(ctx: SolitonContext, directory) -> SpectralData | None:
    """Rebuild cached SpectralData; None on any mismatch (forces recompute)."""
    directory = Path(directory)
    key = spectrum_cache_key(ctx.p, ctx.grid.half_length, ctx.grid.n_points)
    jpath = directory / f"spectrum_{key}.json"
    npath = directory / f"spectrum_{key}.npz"
    if not (jpath.exists() and npath.exists()):
        return None
    meta = json.loads(jpath.read_text())
    if (meta["p"], meta["L"], meta["N"]) != (ctx.p, ctx.grid.half_length,
                                             ctx.grid.n_points):
        return None
    with np.load(npath) as z:
        g = ctx.grid
        return SpectralData(
            ctx=ctx, e0=meta["e0"], mu=meta["mu"],
            y_plus=GridFunction(g, z["y_plus"]),
            y_minus=GridFunction(g, z["y_minus"]),
            z_plus=GridFunction(g, z["z_plus"]),
            z_minus=GridFunction(g, z["z_minus"]),
            residual_plus=meta["residual_plus"],
            residual_minus=meta["residual_minus"],
            reflection_sign=meta["reflection_sign"],
            certificate=meta["certificate"],
            eigenvalues=z["eigenvalues"],
            cluster_max_real=meta["cluster_max_real"])


def emit_plot_script(path, csv_path, xlabel, ylabel, title, logscale_y=False):
    """Gnuplot-compatible companion script for a CSV artifact."""
    lines = [
        "set datafile separator ','",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        f"set title '{title}'",
    ]
    if logscale_y:
        lines.append("set logscale y")
    lines.append(f"plot '{csv_path}' using 1:2 with lines title '{ylabel}'")
    atomic_write(path, "\n".join(lines) + "\n")
