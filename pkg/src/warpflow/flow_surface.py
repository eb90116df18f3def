"""Gauged warped Ricci flow over a 2-D torus base.

Unknowns are the three components of ǧ and the log-warpings w_a = log v_a:

    ∂_t ǧ   = -Ř ǧ + 2 Σ n_a dw_a ⊗ dw_a
    ∂_t w_a = Δ̌ w_a - μ_a e^{-2 w_a}

This differs from the Ricci flow by the diffeomorphisms generated by
Σ n_a ∇w_a; on scalars (∂_t - Δ) of the Ricci flow equals (∂_t - Δ̌) here.
"""

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import geometry
from .errors import BlowupDetected, DegenerateMetric, InsufficientData, InvalidConfig
from .state import FiberSpec, FlowStateSurface

C_CFL = 0.2
C_RXN = 0.05


@dataclass(frozen=True)
class SurfaceProfile:
    """Initial warping v(x, y).

    kind = "constant": v ≡ a
    kind = "sine":     v = a + b sin(kx x + ky y + phase)
    kind = "trig":     v = a + Σ amp sin(kx x + ky y + phase) over ``terms``
    """

    kind: str = "constant"
    a: float = 1.0
    b: float = 0.0
    kx: int = 1
    ky: int = 0
    phase: float = 0.0
    terms: tuple = ()

    def __call__(self, x, y):
        if self.kind == "constant":
            return np.full(np.broadcast(x, y).shape, self.a, dtype=float)
        if self.kind == "sine":
            return self.a + self.b * np.sin(self.kx * x + self.ky * y + self.phase)
        if self.kind == "trig":
            out = self.a + 0 * np.asarray(x, float) + 0 * np.asarray(y, float)
            for amp, kx, ky, ph in self.terms:
                out = out + amp * np.sin(kx * x + ky * y + ph)
            return out
        raise InvalidConfig(f"unknown profile kind {self.kind!r}")


@dataclass(frozen=True)
class BaseMetricFamily:
    """kind = "flat" (identity) or "conformal": e^{2u} δ with u = amp sin(kx x + ky y)."""

    kind: str = "flat"
    amp: float = 0.0
    kx: int = 1
    ky: int = 0

    def __call__(self, x, y):
        if self.kind == "flat":
            one = np.ones(np.broadcast(x, y).shape)
            return one, 0 * one, one
        if self.kind == "conformal":
            e = np.exp(2 * self.amp * np.sin(self.kx * x + self.ky * y))
            return e, 0 * e, e
        raise InvalidConfig(f"unknown base metric kind {self.kind!r}")


@dataclass
class SurfaceConfig:
    M: int = 64
    fibers: tuple = (FiberSpec(2, 1.0),)
    profiles: tuple = (SurfaceProfile("constant", 1.0),)
    base_metric: BaseMetricFamily = BaseMetricFamily()
    eta: float = 1.0
    eps_stop_rel: float = 1e-3
    dt_min: float = 1e-14
    c_cfl: float = C_CFL
    c_rxn: float = C_RXN
    dt_fixed: float | None = None
    t_end: float | None = None
    output_times: tuple = ()
    snapshot_every: int = 20
    max_steps: int = 10_000_000
    monitor: bool = True


@dataclass
class TameReport:
    eta: float
    f_upper_max0: float
    eta_tame: bool
    single_fiber_pinching: bool


def base_scalar_curvature_2d(g, h) -> np.ndarray:
    """Ř of a periodic 2-D metric given as (g11, g12, g22) fields."""
    return geometry.SurfaceGeometry(g, h).scalar_curvature


def init_surface(config: SurfaceConfig):
    if config.M < 16:
        raise InvalidConfig(f"M ≥ 16 required, got {config.M}")
    if len(config.profiles) != len(config.fibers):
        raise InvalidConfig("one initial profile per fiber is required")
    mx = my = config.M
    x = np.arange(mx) * (2 * np.pi / mx)
    y = np.arange(my) * (2 * np.pi / my)
    X, Y = np.meshgrid(x, y, indexing="ij")
    v = np.array([p(X, Y) for p in config.profiles], float)
    if np.any(~(v > 0)):
        raise InvalidConfig("initial warpings must be strictly positive")
    g = np.array([np.broadcast_to(c, X.shape) for c in config.base_metric(X, Y)], float)
    state = FlowStateSurface(0.0, x, y, g, np.log(v), tuple(config.fibers))
    mon = surface_monitors(state)
    f1 = state.fibers[0]
    single = all(
        np.min(state.v[a] ** 2) / (2 * f.mu) >= np.max(state.v[0]) ** 2 / f1.mu
        for a, f in enumerate(state.fibers) if a > 0 and f.mu > 0
    )
    f0 = float(mon.f_upper.max())
    return state, TameReport(config.eta, f0, max(f0, 0.0) <= config.eta, bool(single))


def rhs_surface(state: FlowStateSurface, geom=None):
    geom = geom or geometry.SurfaceGeometry(state.g, state.h)
    R = geom.scalar_curvature
    ns = np.array([f.n for f in state.fibers], float)
    mu = np.array([f.mu for f in state.fibers], float)
    dw = np.array([geom.partials(wa) for wa in state.w])  # (A, 2, ...)
    S = np.einsum("a,ai...,aj...->ij...", ns, dw, dw)
    dg = np.array([-R * state.g[0] + 2 * S[0, 0], -R * state.g[1] + 2 * S[0, 1],
                   -R * state.g[2] + 2 * S[1, 1]])
    dwdt = np.array([geom.lap(wa) for wa in state.w]) - mu[:, None, None] * np.exp(-2 * state.w)
    return dg, dwdt


def stable_dt_surface(state: FlowStateSurface, c_cfl=C_CFL, c_rxn=C_RXN) -> float:
    g11, g12, g22 = state.g
    tr, det = g11 + g22, g11 * g22 - g12**2
    lam_min = 0.5 * tr - np.sqrt(np.maximum(0.25 * tr**2 - det, 0))
    ds2 = float(np.min(lam_min)) * min(state.h) ** 2
    mu = np.array([f.mu for f in state.fibers])[:, None, None]
    rxn = float(np.min(np.exp(2 * state.w) / (mu + 1.0)))
    return min(c_cfl * ds2, c_rxn * rxn)


def _rk4(state: FlowStateSurface, dt: float) -> FlowStateSurface:
    def stage(kg, kw, c):
        return state.copy(t=state.t + c * dt, g=state.g + c * dt * kg, w=state.w + c * dt * kw)

    k1 = rhs_surface(state)
    k2 = rhs_surface(stage(*k1, 0.5))
    k3 = rhs_surface(stage(*k2, 0.5))
    k4 = rhs_surface(stage(*k3, 1.0))
    dg = (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6
    dw = (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6
    return state.copy(t=state.t + dt, g=state.g + dt * dg, w=state.w + dt * dw)


@dataclass
class SurfaceMonitors:
    t: float
    R_check: np.ndarray
    p: np.ndarray
    f_upper: np.ndarray
    f_lower: np.ndarray
    area: float
    gauss_bonnet: float
    area_rate: float
    vmin: np.ndarray
    vmax: np.ndarray
    uhlenbeck_residual: np.ndarray | None = None

    def summary(self) -> dict:
        return {
            "t": self.t,
            "R_check_min": float(self.R_check.min()),
            "R_check_max": float(self.R_check.max()),
            "p_max": float(self.p.max()),
            "f_upper_max": float(self.f_upper.max()),
            "f_lower_min": float(self.f_lower.min()),
            "area": self.area,
            "gauss_bonnet": self.gauss_bonnet,
            "area_rate": self.area_rate,
            "vmin": self.vmin.tolist(),
            "vmax": self.vmax.tolist(),
        }


def surface_monitors(state: FlowStateSurface, geom=None) -> SurfaceMonitors:
    geom = geom or geometry.SurfaceGeometry(state.g, state.h)
    R = geom.scalar_curvature
    ns = np.array([f.n for f in state.fibers], float)
    grad = np.array([geom.grad(wa) for wa in state.w])
    p = np.einsum("a,ai...,ai...->...", ns, grad, grad)
    v = state.v
    return SurfaceMonitors(
        t=state.t,
        R_check=R,
        p=p,
        f_upper=R + 2 * p,
        f_lower=R - p,
        area=geom.integrate(np.ones_like(R)),
        gauss_bonnet=geom.integrate(R),
        area_rate=geom.integrate(p - R),
        vmin=v.min(axis=(1, 2)),
        vmax=v.max(axis=(1, 2)),
    )


@dataclass
class MonitorSeries:
    """Scalar reductions of SurfaceMonitors kept at every step."""

    t: list = field(default_factory=list)
    area: list = field(default_factory=list)
    area_rate: list = field(default_factory=list)
    gauss_bonnet: list = field(default_factory=list)
    f_upper_max: list = field(default_factory=list)
    f_lower_min: list = field(default_factory=list)
    R_check_min: list = field(default_factory=list)
    vmin: list = field(default_factory=list)
    # constants needed by the bound fits
    C0_needed: list = field(default_factory=list)
    C1_needed: list = field(default_factory=list)

    def add(self, m: SurfaceMonitors, mu1: float, v1: np.ndarray):
        self.t.append(m.t)
        self.area.append(m.area)
        self.area_rate.append(m.area_rate)
        self.gauss_bonnet.append(m.gauss_bonnet)
        self.f_upper_max.append(float(m.f_upper.max()))
        self.f_lower_min.append(float(m.f_lower.min()))
        self.R_check_min.append(float(m.R_check.min()))
        self.vmin.append(m.vmin.copy())
        v1min = float(v1.min())
        fmax = float(m.f_upper.max())
        # f_max above the pinching threshold 2μ₁/(3 v₁,min²) forces C0 ≥ f_max
        self.C0_needed.append(fmax if fmax > 2 * mu1 / (3 * v1min**2) else 0.0)
        self.C1_needed.append(float(max(np.max(-m.R_check * v1**2), 0.0)))

    def as_arrays(self) -> dict:
        return {k: np.array(v) for k, v in self.__dict__.items()}


@dataclass
class TrajectorySurface:
    snapshots: list
    series: MonitorSeries
    reason: str
    tame: TameReport | None = None
    outputs: dict = field(default_factory=dict)

    @property
    def final(self):
        return self.snapshots[-1]

    def fitted_constants(self) -> dict:
        """C0: smallest constant ≥ f_max(0) with f_max ≤ max(C0, 2μ₁/(3 v₁,min²)) at every step.

        C1: smallest constant with Ř ≥ -C1/v₁² pointwise at every step.
        """
        s = self.series
        return {"C0": float(max(max(s.C0_needed), s.f_upper_max[0])), "C1": float(max(s.C1_needed))}


def run_surface(config: SurfaceConfig, state: FlowStateSurface | None = None, hooks: Sequence = ()):
    tame = None
    if state is None:
        state, tame = init_surface(config)
    mu1 = state.fibers[0].mu
    eps_stop = config.eps_stop_rel * float(np.min(state.v))
    outs = sorted(t for t in config.output_times if t > state.t)
    series = MonitorSeries()
    if config.monitor:
        series.add(surface_monitors(state), mu1, state.v[0])
    snaps = [state.copy()]
    outputs = {}
    reason = "max_steps"
    last_good = state
    for step in range(1, config.max_steps + 1):
        dt = config.dt_fixed or stable_dt_surface(state, config.c_cfl, config.c_rxn)
        if dt < config.dt_min:
            reason = "dt_underflow"
            break
        target = outs[0] if outs else config.t_end
        hit = False
        if target is not None and state.t + dt >= target - 1e-15 * max(1.0, abs(target)):
            dt = target - state.t
            hit = True
        try:
            new = _rk4(state, dt)
        except DegenerateMetric as exc:
            raise BlowupDetected(f"base metric degenerated at t={state.t:.6g}", last_good) from exc
        if not (np.all(np.isfinite(new.g)) and np.all(np.isfinite(new.w))):
            raise BlowupDetected(f"non-finite field at t={new.t:.6g}", last_good)
        if hit:
            new.t = target
        for hook in hooks:
            new = hook(new, step) or new
        state = last_good = new
        if config.monitor:
            series.add(surface_monitors(state), mu1, state.v[0])
        if hit and outs and state.t == outs[0]:
            outputs[outs.pop(0)] = state.copy()
        if step % config.snapshot_every == 0:
            snaps.append(state.copy())
        if np.min(state.v) < eps_stop:
            reason = "eps_stop"
            break
        if config.t_end is not None and state.t >= config.t_end:
            reason = "t_end"
            break
    if snaps[-1].t != state.t:
        snaps.append(state.copy())
    return TrajectorySurface(snaps, series, reason, tame, outputs)


# ---------------------------------------------------------------------------
# evolution identities
# ---------------------------------------------------------------------------


def _time_derivative(f0, f1, f2, t0, t1, t2):
    h0, h1 = t1 - t0, t2 - t1
    return -h1 / (h0 * (h0 + h1)) * f0 + (h1 - h0) / (h0 * h1) * f1 + h0 / (h1 * (h0 + h1)) * f2


def r_evolution_rhs(state: FlowStateSurface, geom=None) -> np.ndarray:
    """Ř² - 2Ř p + 2 Σ n_a ((Δ̌w_a)² - |∇̌²w_a|²)."""
    geom = geom or geometry.SurfaceGeometry(state.g, state.h)
    R = geom.scalar_curvature
    ns = np.array([f.n for f in state.fibers], float)
    out = R**2
    for n, wa in zip(ns, state.w):
        grad = geom.grad(wa)
        H = geom.hess(wa)
        lap = H[0, 0] + H[1, 1]
        out = out - 2 * R * n * np.einsum("i...,i...->...", grad, grad)
        out = out + 2 * n * (lap**2 - np.einsum("ij...,ij...->...", H, H))
    return out


def uhlenbeck_rhs(state: FlowStateSurface, geom=None) -> np.ndarray:
    """(a₁+b₁)² + 2(a₂² + b₂² + λ₅²) for a single S² fiber."""
    q = geometry.uhlenbeck(state, "chart", geom)
    return (q.a1 + q.b1) ** 2 + 2 * (q.a2**2 + q.b2**2 + q.lambda5**2)


@dataclass
class REvolutionResidual:
    times: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    scale: np.ndarray
    uhlenbeck_l2: np.ndarray | None = None
    uhlenbeck_scale: np.ndarray | None = None

    @property
    def norm(self) -> float:
        return float(np.max(self.l2))


def verify_R_evolution(states) -> REvolutionResidual:
    """Residuals of the Ř evolution and, with a single S² fiber, of the 4-D Uhlenbeck identity.

    ``states`` are consecutive time levels of one run; ∂_t uses three-point differences.
    """
    if len(states) < 3:
        raise InsufficientData("need at least three consecutive states")
    four_d = len(states[0].fibers) == 1 and states[0].fibers[0].n == 2
    geoms = [geometry.SurfaceGeometry(s.g, s.h) for s in states]
    Rs = [g.scalar_curvature for g in geoms]
    times, l2, linf, scale, ul2, uscale = [], [], [], [], [], []
    for k in range(1, len(states) - 1):
        t = (states[k - 1].t, states[k].t, states[k + 1].t)
        geom = geoms[k]
        R_t = _time_derivative(Rs[k - 1], Rs[k], Rs[k + 1], *t)
        heat = R_t - geom.lap(Rs[k])
        r = heat - r_evolution_rhs(states[k], geom)
        times.append(t[1])
        l2.append(np.sqrt(geom.integrate(r**2)))
        linf.append(float(np.abs(r).max()))
        scale.append(np.sqrt(geom.integrate(R_t**2)))
        if four_d:
            # a₁ + b₁ = 2Ř
            ru = 2 * heat - uhlenbeck_rhs(states[k], geom)
            ul2.append(np.sqrt(geom.integrate(ru**2)))
            uscale.append(np.sqrt(geom.integrate((2 * heat) ** 2)))
    return REvolutionResidual(
        np.array(times), np.array(l2), np.array(linf), np.array(scale),
        np.array(ul2) if four_d else None, np.array(uscale) if four_d else None,
    )


# ---------------------------------------------------------------------------
# text output
# ---------------------------------------------------------------------------


def write_snapshot(path, state: FlowStateSurface):
    X, Y = np.meshgrid(state.x, state.y, indexing="ij")
    cols = [X.ravel(), Y.ravel(), *(c.ravel() for c in state.g), *(wa.ravel() for wa in state.w)]
    header = (f"t={state.t!r} Mx={state.x.size} My={state.y.size}\nx y g11 g12 g22 "
              + " ".join(f"w{a + 1}" for a in range(len(state.w))))
    np.savetxt(path, np.column_stack(cols), header=header, fmt="%.17g")


def r_evolution_refinement(config: SurfaceConfig, levels=((32, 2e-3), (64, 1e-3), (128, 5e-4)),
                           t_eval: float = 0.01):
    """Ř-evolution (and, with one S² fiber, Uhlenbeck) residual norms at t_eval per (M, Δt) level."""
    from dataclasses import replace as _replace

    norms, unorms = [], []
    for M, dt in levels:
        n = int(round(t_eval / dt))
        cfg = _replace(config, M=M, dt_fixed=dt, t_end=(n + 1) * dt, snapshot_every=1, monitor=False)
        res = verify_R_evolution(run_surface(cfg).snapshots[n - 1:n + 2])
        norms.append(float(res.l2[0]))
        if res.uhlenbeck_l2 is not None:
            unorms.append(float(res.uhlenbeck_l2[0]))
    ratios = [p / q for p, q in zip(norms, norms[1:])]
    return {"levels": [list(x) for x in levels], "R_norms": norms, "R_ratios": ratios,
            "uhlenbeck_norms": unorms or None,
            "uhlenbeck_ratios": [p / q for p, q in zip(unorms, unorms[1:])] or None}
