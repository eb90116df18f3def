"""Multiply warped Ricci flow over S¹ in the arclength gauge.

The θ-grid is fixed; the metric density φ = ds/dθ evolves with the flow, so
all spatial derivatives are arclength derivatives ∂_s = φ⁻¹∂_θ. Time
derivatives at fixed θ are those of the genuine (ungauged) Ricci flow.
"""

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from . import geometry, stencils
from .errors import BlowupDetected, InsufficientData, InvalidConfig, NonPositiveWarping
from .state import FiberSpec, FlowStateS1

C_CFL = 0.2
C_RXN = 0.05


@dataclass(frozen=True)
class Profile:
    """Initial warping family.

    kind = "constant": v ≡ a
    kind = "cosine":   v = a + b cos(k θ + phase)   (a neck at θ = (π - phase)/k when b > 0)
    kind = "table":    periodic cubic spline through ``values`` at θ_j = 2πj/len(values)
    """

    kind: str = "constant"
    a: float = 1.0
    b: float = 0.0
    k: int = 1
    phase: float = 0.0
    values: tuple = ()

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.kind == "constant":
            return np.full_like(theta, self.a)
        if self.kind == "cosine":
            return self.a + self.b * np.cos(self.k * theta + self.phase)
        if self.kind == "table":
            vals = np.asarray(self.values, dtype=float)
            nodes = np.arange(vals.size + 1) * (2 * np.pi / vals.size)
            spl = CubicSpline(nodes, np.append(vals, vals[0]), bc_type="periodic")
            return spl(np.mod(theta, 2 * np.pi))
        raise InvalidConfig(f"unknown profile kind {self.kind!r}")


@dataclass
class S1Config:
    M: int = 256
    fibers: tuple = (FiberSpec(2, 1.0),)
    profiles: tuple = (Profile("constant", 1.0),)
    eps_stop_rel: float = 1e-3
    dt_min: float = 1e-14
    c_cfl: float = C_CFL
    c_rxn: float = C_RXN
    dt_fixed: float | None = None
    t_end: float | None = None
    output_times: tuple = ()
    snapshot_every: int = 20
    max_steps: int = 10_000_000
    cylinder_c1: float = 1.0
    monitor: bool = True


@dataclass
class AssumptionReport:
    single_fiber_pinching: bool
    guarantee_cylinder: bool
    small_gradient: bool
    r0: float
    c1: float

    def as_dict(self):
        return dict(self.__dict__)


def _validate(config: S1Config):
    errs = []
    if config.M < 16:
        errs.append(f"M ≥ 16 required, got {config.M}")
    if len(config.fibers) != len(config.profiles):
        errs.append("one initial profile per fiber is required")
    for f in config.fibers:
        if f.n < 2:
            errs.append(f"n_a ≥ 2 required, got {f.n}")
    if errs:
        raise InvalidConfig("; ".join(errs))


def scalar_curvature_s1(state: FlowStateS1) -> np.ndarray:
    """Scalar curvature from the one-dimensional closed form (independent of the block assembly)."""
    geom = geometry.CircleGeometry(state.phi, state.h)
    v = state.v
    vs = np.array([geom.ds(va) for va in v])
    vss = np.array([geom.dss(va) for va in v])
    ns = np.array([f.n for f in state.fibers], float)[:, None]
    lam = np.array([f.lambda_hat for f in state.fibers])[:, None]
    q = vs / v
    R = -2 * np.sum(ns * vss / v, axis=0)
    R += np.sum(ns * (ns - 1) * (lam - vs**2) / v**2, axis=0)
    R -= np.sum(ns * q, axis=0) ** 2 - np.sum(ns**2 * q**2, axis=0)
    return R


def assumption_report(state: FlowStateS1, cylinder_c1: float = 1.0) -> AssumptionReport:
    """Flags of the initial-data hypotheses; fiber 0 is the one expected to pinch."""
    geom = geometry.CircleGeometry(state.phi, state.h)
    f1 = state.fibers[0]
    v1 = state.v[0]
    single = all(
        np.min(state.v[a] ** 2) / (2 * f.mu) >= np.max(v1) ** 2 / f1.mu if f.mu > 0 else True
        for a, f in enumerate(state.fibers)
        if a > 0
    )
    r0 = float(np.min(scalar_curvature_s1(state)))
    c1 = float(np.max(v1))
    cyl = all(f.mu >= f.n - 1 for f in state.fibers) and c1 <= cylinder_c1
    small = bool(np.isclose(f1.mu, f1.n - 1) and np.max(geom.ds(v1) ** 2) <= 1.0)
    return AssumptionReport(bool(single), bool(cyl), small, r0, c1)


def init_state(config: S1Config):
    _validate(config)
    theta = np.arange(config.M) * (2 * np.pi / config.M)
    v = np.array([p(theta) for p in config.profiles], dtype=float)
    if np.any(~(v > 0)):
        raise InvalidConfig("initial warpings must be strictly positive")
    state = FlowStateS1(0.0, theta, np.ones(config.M), v, tuple(config.fibers))
    return state, assumption_report(state, config.cylinder_c1)


def rhs_s1(state: FlowStateS1):
    """(dv/dt, dφ/dt) at fixed θ."""
    v, phi, h = state.v, state.phi, state.h
    if np.any(~(v > 0)):
        raise NonPositiveWarping("warping function is not strictly positive")
    phi_t = stencils.d1(phi, h)
    vt = stencils.d1(v, h)
    vs = vt / phi
    vss = (stencils.d2(v, h) - phi_t / phi * vt) / phi**2
    ns = np.array([f.n for f in state.fibers], float)[:, None]
    mu = np.array([f.mu for f in state.fibers])[:, None]
    drift = np.sum(ns * vs / v, axis=0)
    dv = vss + vs * drift - (mu + vs**2) / v
    dphi = phi * np.sum(ns * vss / v, axis=0)
    return dv, dphi


def _rk4(state: FlowStateS1, dt: float) -> FlowStateS1:
    def stage(base, kv, kp, c):
        return base.copy(t=base.t + c * dt, v=base.v + c * dt * kv, phi=base.phi + c * dt * kp)

    k1 = rhs_s1(state)
    k2 = rhs_s1(stage(state, *k1, 0.5))
    k3 = rhs_s1(stage(state, *k2, 0.5))
    k4 = rhs_s1(stage(state, *k3, 1.0))
    dv = (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6
    dp = (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6
    return state.copy(t=state.t + dt, v=state.v + dt * dv, phi=state.phi + dt * dp)


def stable_dt(state: FlowStateS1, c_cfl=C_CFL, c_rxn=C_RXN) -> float:
    ds = np.min(state.phi) * state.h
    mu = np.array([f.mu for f in state.fibers])[:, None]
    rxn = np.min(state.v**2 / (mu + 1.0))
    return float(min(c_cfl * ds**2, c_rxn * rxn))


@dataclass
class TrajectoryS1:
    snapshots: list
    times: np.ndarray
    vmin: np.ndarray  # (steps, A)
    vmax: np.ndarray
    records: list
    reason: str
    T_hat: float = float("nan")
    T_fit_residual: float = float("nan")
    outputs: dict = field(default_factory=dict)
    assumptions: AssumptionReport | None = None

    @property
    def final(self) -> FlowStateS1:
        return self.snapshots[-1]


def run_s1(config: S1Config, state: FlowStateS1 | None = None,
           hooks: Sequence[Callable] = ()) -> TrajectoryS1:
    """RK4 until the smallest warping falls below ε_stop, Δt underflows, or t_end is reached.

    ``hooks`` are called as hook(state, step) after each accepted step and may
    return a modified state (used for fault injection in tests).
    """
    from . import monitors

    report = None
    if state is None:
        state, report = init_state(config)
    eps_stop = config.eps_stop_rel * float(np.min(state.v))
    outs = sorted(t for t in config.output_times if t > state.t)
    times, vmin, vmax, records = [state.t], [state.v.min(axis=1)], [state.v.max(axis=1)], []
    if config.monitor:
        records.append(monitors.step_record(state))
    snaps = [state.copy()]
    outputs = {}
    reason = "max_steps"
    last_good = state
    for step in range(1, config.max_steps + 1):
        dt = config.dt_fixed or stable_dt(state, config.c_cfl, config.c_rxn)
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
        except NonPositiveWarping as exc:
            raise BlowupDetected(f"warping lost positivity at t={state.t:.6g}", last_good) from exc
        if hit:
            new.t = target
        for hook in hooks:
            new = hook(new, step) or new
        if not (np.all(np.isfinite(new.v)) and np.all(np.isfinite(new.phi))):
            raise BlowupDetected(f"non-finite field at t={new.t:.6g}", last_good)
        state = last_good = new
        times.append(state.t)
        vmin.append(state.v.min(axis=1))
        vmax.append(state.v.max(axis=1))
        if config.monitor:
            records.append(monitors.step_record(state))
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
    traj = TrajectoryS1(snaps, np.array(times), np.array(vmin), np.array(vmax), records,
                        reason, outputs=outputs, assumptions=report)
    if reason == "eps_stop":
        try:
            traj.T_hat, traj.T_fit_residual = estimate_T(traj.times, np.min(traj.vmin, axis=1) ** 2)
        except InsufficientData:
            pass
    return traj


def estimate_T(times, vmin_sq, decade: float = 10.0):
    """Fit v²_min ≈ k (T - t) on the last decade of v²_min and return (T̂, rms residual).

    The slope k is a free fit parameter; the last decade is every sample with
    v²_min within a factor ``decade`` of the final value.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(vmin_sq, dtype=float)
    if t.size < 10:
        raise InsufficientData("need at least 10 samples")
    sel = y <= decade * y[-1]
    # require a contiguous tail
    start = t.size - int(np.argmin(sel[::-1])) if not sel.all() else 0
    t, y = t[start:], y[start:]
    if t.size < 10:
        raise InsufficientData(f"only {t.size} samples in the final decade")
    A = np.vstack([np.ones_like(t), t]).T
    (c0, c1), *_ = np.linalg.lstsq(A, y, rcond=None)
    if not c1 < 0:
        raise InsufficientData("v²_min is not decaying")
    T = -c0 / c1
    res = float(np.sqrt(np.mean((A @ np.array([c0, c1]) - y) ** 2)))
    return float(T), res


def gauge_length_rate(state: FlowStateS1) -> float:
    """∮ (Σ n_a (v_a)_ss / v_a) φ dθ, the predicted d/dt of the total length."""
    geom = geometry.CircleGeometry(state.phi, state.h)
    ns = np.array([f.n for f in state.fibers], float)
    vss = np.array([geom.dss(va) for va in state.v])
    return geom.integrate(np.einsum("a,a...->...", ns, vss / state.v))


# ---------------------------------------------------------------------------
# text output
# ---------------------------------------------------------------------------


def write_snapshot(path, state: FlowStateS1):
    cols = [state.theta, state.phi] + list(state.v)
    header = f"t={state.t!r}\ntheta phi " + " ".join(f"v{a + 1}" for a in range(len(state.v)))
    np.savetxt(path, np.column_stack(cols), header=header, fmt="%.17g")


def read_snapshot(path, fibers) -> FlowStateS1:
    with open(path) as fh:
        t = float(fh.readline().split("=", 1)[1])
    data = np.loadtxt(path, ndmin=2)
    return FlowStateS1(t, data[:, 0], data[:, 1], data[:, 2:].T.copy(), tuple(fibers))
