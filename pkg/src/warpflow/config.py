"""INI run configuration.

Sections and keys (all optional unless noted):

    [run]      mode (required), out, seed
    [grid]     M
    [fiber.N]  n, mu, profile, a, b, k, kx, ky, phase, values, terms
    [time]     eps_stop_rel, dt_min, c_cfl, c_rxn, dt_fixed, t_end,
               output_times, snapshot_every, max_steps
    [base]     metric (flat | conformal), amp, kx, ky
    [surface]  eta
    [s1]       cylinder_c1
    [soliton]  v0, sweep, r_max, f1
    [oracle]   n_states, M, h, tol, base (circle | torus)
    [report]   run_dir

Fiber sections are numbered from 1 and ordered by number. Every problem in
the file is collected before raising, each with its line number.
"""

import configparser
import math
import re
from dataclasses import dataclass, field

from .errors import ParseError, SchemaError
from .flow_s1 import Profile, S1Config
from .flow_surface import BaseMetricFamily, SurfaceConfig, SurfaceProfile
from .state import FiberSpec

MODES = ("run-s1", "run-surface", "soliton-shoot", "oracle-check", "report")

_FIBER_KEYS = {"n", "mu", "profile", "a", "b", "k", "kx", "ky", "phase", "values", "terms"}
_KEYS = {
    "run": {"mode", "out", "seed"},
    "grid": {"m"},
    "time": {"eps_stop_rel", "dt_min", "c_cfl", "c_rxn", "dt_fixed", "t_end",
             "output_times", "snapshot_every", "max_steps"},
    "base": {"metric", "amp", "kx", "ky"},
    "surface": {"eta"},
    "s1": {"cylinder_c1"},
    "soliton": {"v0", "sweep", "r_max", "f1"},
    "oracle": {"n_states", "m", "h", "tol", "base"},
    "report": {"run_dir"},
}


@dataclass
class FiberEntry:
    n: int = 2
    mu: float = 1.0
    profile: str = "constant"
    a: float = 1.0
    b: float = 0.0
    k: int = 1
    kx: int = 1
    ky: int = 0
    phase: float = 0.0
    values: tuple = ()
    terms: tuple = ()


@dataclass
class RunConfig:
    mode: str
    out: str = "runs/out"
    seed: int = 1
    M: int | None = None
    fibers: list = field(default_factory=list)
    eps_stop_rel: float = 1e-3
    dt_min: float = 1e-14
    c_cfl: float = 0.2
    c_rxn: float = 0.05
    dt_fixed: float | None = None
    t_end: float | None = None
    output_times: tuple = ()
    snapshot_every: int = 20
    max_steps: int = 10_000_000
    base_metric: str = "flat"
    base_amp: float = 0.0
    base_kx: int = 1
    base_ky: int = 0
    eta: float = 1.0
    cylinder_c1: float = 1.0
    v0: float | None = None
    sweep: tuple = ()
    r_max: float = 50.0
    f1: float = 0.5
    oracle_n_states: int = 100
    oracle_M: int = 512
    oracle_h: float = 4e-3
    oracle_tol: float = 1e-6
    oracle_base: str = "circle"
    run_dir: str | None = None

    def fiber_specs(self):
        return tuple(FiberSpec(f.n, f.mu) for f in self.fibers)

    def s1_config(self) -> S1Config:
        profiles = tuple(
            Profile(f.profile, f.a, f.b, f.k, f.phase, tuple(f.values)) for f in self.fibers
        )
        return S1Config(
            M=self.M or 256, fibers=self.fiber_specs(), profiles=profiles,
            eps_stop_rel=self.eps_stop_rel, dt_min=self.dt_min, c_cfl=self.c_cfl,
            c_rxn=self.c_rxn, dt_fixed=self.dt_fixed, t_end=self.t_end,
            output_times=self.output_times, snapshot_every=self.snapshot_every,
            max_steps=self.max_steps, cylinder_c1=self.cylinder_c1,
        )

    def surface_config(self) -> SurfaceConfig:
        profiles = tuple(
            SurfaceProfile(f.profile, f.a, f.b, f.kx, f.ky, f.phase, tuple(f.terms))
            for f in self.fibers
        )
        return SurfaceConfig(
            M=self.M or 64, fibers=self.fiber_specs(), profiles=profiles,
            base_metric=BaseMetricFamily(self.base_metric, self.base_amp, self.base_kx, self.base_ky),
            eta=self.eta, eps_stop_rel=self.eps_stop_rel, dt_min=self.dt_min,
            c_cfl=self.c_cfl, c_rxn=self.c_rxn, dt_fixed=self.dt_fixed, t_end=self.t_end,
            output_times=self.output_times, snapshot_every=self.snapshot_every,
            max_steps=self.max_steps,
        )


def _line_index(text):
    """(section, key) -> line number, and section -> header line number."""
    keys, sections = {}, {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            sections.setdefault(section, no)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            keys.setdefault((section, m.group(1).strip().lower()), no)
    return keys, sections


class _Collector:
    def __init__(self, keys, sections):
        self.errors = []
        self.keys = keys
        self.sections = sections

    def err(self, section, key, msg):
        line = self.keys.get((section, key)) or self.sections.get(section)
        where = f"line {line}: " if line else ""
        self.errors.append(f"{where}[{section}] {key}: {msg}")

    def get(self, sec, section, key, conv, default, check=None, why=""):
        if key not in sec:
            return default
        raw = sec[key]
        try:
            val = conv(raw)
        except (TypeError, ValueError):
            self.err(section, key, f"cannot parse {raw!r} as {conv.__name__}")
            return default
        if check is not None and not check(val):
            self.err(section, key, f"{why} (got {raw})")
        return val


def _floats(raw):
    return tuple(float(x) for x in re.split(r"[,\s]+", raw.strip()) if x)


def _terms(raw):
    # "amp kx ky phase; amp kx ky phase"
    out = []
    for chunk in raw.split(";"):
        vals = chunk.split()
        if not vals:
            continue
        if len(vals) != 4:
            raise ValueError(chunk)
        out.append((float(vals[0]), int(vals[1]), int(vals[2]), float(vals[3])))
    return tuple(out)


def _opt_float(raw):
    return None if raw.strip().lower() in ("", "none") else float(raw)


_terms.__name__ = "terms"
_floats.__name__ = "float list"
_opt_float.__name__ = "float"


def parse_text(text, name="<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=name)
    except configparser.ParsingError as exc:
        raise ParseError([f"line {no}: unparsable line {line.strip()!r}" for no, line in exc.errors])
    except configparser.Error as exc:
        lineno = getattr(exc, "lineno", None)
        raise ParseError([f"line {lineno}: {exc.message}" if lineno else str(exc)])
    keys, sections = _line_index(text)
    c = _Collector(keys, sections)

    fiber_sections = []
    for section in cp.sections():
        m = re.fullmatch(r"fiber\.(\d+)", section)
        if m:
            fiber_sections.append((int(m.group(1)), section))
            allowed = _FIBER_KEYS
        elif section in _KEYS:
            allowed = _KEYS[section]
        else:
            c.err(section, "", "unknown section")
            continue
        for key in cp[section]:
            if key not in allowed:
                c.err(section, key, "unknown key")

    run = cp["run"] if cp.has_section("run") else {}
    mode = run.get("mode")
    if mode is None:
        c.errors.append("[run] mode: required key missing")
        mode = "run-s1"
    elif mode not in MODES:
        c.err("run", "mode", f"must be one of {', '.join(MODES)}")
    cfg = RunConfig(mode=mode)
    cfg.out = run.get("out", cfg.out)
    cfg.seed = c.get(run, "run", "seed", int, cfg.seed, lambda v: v >= 0, "seed ≥ 0 required")

    if cp.has_section("grid"):
        cfg.M = c.get(cp["grid"], "grid", "m", int, None, lambda v: v >= 16, "M ≥ 16 required")

    for _, section in sorted(fiber_sections):
        sec = cp[section]
        f = FiberEntry()
        f.n = c.get(sec, section, "n", int, f.n, lambda v: v >= 2, "n_a ≥ 2 required")
        f.mu = c.get(sec, section, "mu", float, f.mu, lambda v: v >= 0, "mu_a ≥ 0 required")
        f.profile = sec.get("profile", f.profile)
        kinds = {"constant", "cosine", "table", "sine", "trig"}
        if f.profile not in kinds:
            c.err(section, "profile", f"must be one of {', '.join(sorted(kinds))}")
        f.a = c.get(sec, section, "a", float, f.a)
        f.b = c.get(sec, section, "b", float, f.b)
        f.k = c.get(sec, section, "k", int, f.k, lambda v: v >= 1, "k ≥ 1 required")
        f.kx = c.get(sec, section, "kx", int, f.kx)
        f.ky = c.get(sec, section, "ky", int, f.ky)
        f.phase = c.get(sec, section, "phase", float, f.phase)
        f.values = c.get(sec, section, "values", _floats, f.values)
        f.terms = c.get(sec, section, "terms", _terms, f.terms)
        if f.profile == "table" and len(f.values) < 4:
            c.err(section, "values", "table profile needs at least 4 values")
        if f.profile in ("constant", "cosine", "sine") and not f.a - abs(f.b) > 0:
            c.err(section, "a", "warping must stay positive (a > |b|)")
        cfg.fibers.append(f)

    if cp.has_section("time"):
        sec = cp["time"]
        pos = (lambda v: v > 0, "must be > 0")
        cfg.eps_stop_rel = c.get(sec, "time", "eps_stop_rel", float, cfg.eps_stop_rel, *pos)
        cfg.dt_min = c.get(sec, "time", "dt_min", float, cfg.dt_min, *pos)
        cfg.c_cfl = c.get(sec, "time", "c_cfl", float, cfg.c_cfl, *pos)
        cfg.c_rxn = c.get(sec, "time", "c_rxn", float, cfg.c_rxn, *pos)
        cfg.dt_fixed = c.get(sec, "time", "dt_fixed", _opt_float, cfg.dt_fixed,
                             lambda v: v is None or v > 0, "must be > 0")
        cfg.t_end = c.get(sec, "time", "t_end", _opt_float, cfg.t_end,
                          lambda v: v is None or v > 0, "must be > 0")
        cfg.output_times = c.get(sec, "time", "output_times", _floats, cfg.output_times)
        cfg.snapshot_every = c.get(sec, "time", "snapshot_every", int, cfg.snapshot_every, *pos)
        cfg.max_steps = c.get(sec, "time", "max_steps", int, cfg.max_steps, *pos)

    if cp.has_section("base"):
        sec = cp["base"]
        cfg.base_metric = sec.get("metric", cfg.base_metric)
        if cfg.base_metric not in ("flat", "conformal"):
            c.err("base", "metric", "must be flat or conformal")
        cfg.base_amp = c.get(sec, "base", "amp", float, cfg.base_amp)
        cfg.base_kx = c.get(sec, "base", "kx", int, cfg.base_kx)
        cfg.base_ky = c.get(sec, "base", "ky", int, cfg.base_ky)
    if cp.has_section("surface"):
        cfg.eta = c.get(cp["surface"], "surface", "eta", float, cfg.eta,
                        lambda v: v > 0, "eta > 0 required")
    if cp.has_section("s1"):
        cfg.cylinder_c1 = c.get(cp["s1"], "s1", "cylinder_c1", float, cfg.cylinder_c1)

    if cp.has_section("soliton"):
        sec = cp["soliton"]
        cfg.v0 = c.get(sec, "soliton", "v0", float, None, lambda v: v > 0, "v0 > 0 required")
        cfg.sweep = c.get(sec, "soliton", "sweep", _floats, (),
                          lambda v: all(x > 0 for x in v), "all v0 > 0 required")
        cfg.r_max = c.get(sec, "soliton", "r_max", float, cfg.r_max,
                          lambda v: 0 < v <= 100, "0 < r_max ≤ 100 required")
        cfg.f1 = c.get(sec, "soliton", "f1", float, cfg.f1, math.isfinite, "must be finite")

    if cp.has_section("oracle"):
        sec = cp["oracle"]
        cfg.oracle_n_states = c.get(sec, "oracle", "n_states", int, cfg.oracle_n_states,
                                    lambda v: v >= 1, "n_states ≥ 1 required")
        cfg.oracle_M = c.get(sec, "oracle", "m", int, cfg.oracle_M, lambda v: v >= 16, "M ≥ 16 required")
        cfg.oracle_h = c.get(sec, "oracle", "h", float, cfg.oracle_h,
                             lambda v: 1e-4 <= v <= 1e-2, "h must lie in [1e-4, 1e-2]")
        cfg.oracle_tol = c.get(sec, "oracle", "tol", float, cfg.oracle_tol, lambda v: v > 0, "must be > 0")
        cfg.oracle_base = sec.get("base", cfg.oracle_base)
        if cfg.oracle_base not in ("circle", "torus"):
            c.err("oracle", "base", "must be circle or torus")

    if cp.has_section("report"):
        cfg.run_dir = cp["report"].get("run_dir")

    if cfg.mode in ("run-s1", "run-surface") and not cfg.fibers:
        c.errors.append(f"mode {cfg.mode} needs at least one [fiber.N] section")
    if cfg.mode == "run-s1":
        for i, f in enumerate(cfg.fibers, start=1):
            if f.profile not in ("constant", "cosine", "table"):
                c.err(f"fiber.{i}", "profile", "run-s1 profiles are constant, cosine or table")
    if cfg.mode == "run-surface":
        for i, f in enumerate(cfg.fibers, start=1):
            if f.profile not in ("constant", "sine", "trig"):
                c.err(f"fiber.{i}", "profile", "run-surface profiles are constant, sine or trig")

    if c.errors:
        raise SchemaError(c.errors)
    return cfg


def parse_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_text(text, str(path))
