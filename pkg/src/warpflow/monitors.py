"""Quantities controlled along the S¹ flow, and their assertions.

Per-step records hold only state-derived values; anything that needs the
singular time (Type-I ratios, rescaled curvatures) is filled in afterwards
from T̂.
"""

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import InsufficientData
from .state import FlowStateS1

BETA = 32.0
DELTA_OMEGA = 0.1
VMAX_RTOL = 1e-10
GRAD_ATOL = 1e-6
VSS_ROUNDOFF = 64 * np.finfo(float).eps


@dataclass
class MonitorRecord:
    t: float
    vmax: np.ndarray
    vmin: np.ndarray
    grad_sq_max: np.ndarray
    Q: float
    P: float
    Qcal: float
    Pcal: float
    F_max: float
    chi_max: np.ndarray
    B_const: float
    L_min_on_Omega: float
    Omega_extent: float
    Z_max: np.ndarray
    rm_max: float
    sigma_fl_max: float
    neck_index: int
    v_neck: float
    kappa0: float
    kappa1: float
    neck_halfwidth_cells: float
    typeI_ratio: float = float("nan")
    vmin_sq_over_Tt: float = float("nan")
    kappa0_rescaled: float = float("nan")
    kappa1_rescaled: float = float("nan")
    Sigma_fl_rescaled: float = float("nan")


# ---------------------------------------------------------------------------
# pointwise building blocks (1-D base)
# ---------------------------------------------------------------------------


@dataclass
class S1Jet:
    v: np.ndarray
    vs: np.ndarray
    vss: np.ndarray
    vsss: np.ndarray
    ns: np.ndarray
    mu: np.ndarray
    geom: geometry.CircleGeometry


def s1_jet(state: FlowStateS1) -> S1Jet:
    geom = geometry.CircleGeometry(state.phi, state.h)
    v = state.v
    return S1Jet(
        v,
        np.array([geom.ds(va) for va in v]),
        np.array([geom.dss(va) for va in v]),
        np.array([geom.dsss(va) for va in v]),
        np.array([f.n for f in state.fibers], float),
        np.array([f.mu for f in state.fibers], float),
        geom,
    )


def hessian_norm_sq(j: S1Jet, f_s, f_ss):
    """|∇²f|² of a base function on the full warped product."""
    fib = np.einsum("b,b...->...", j.ns, (j.vs * f_s / j.v) ** 2)
    return f_ss**2 + fib


def chi(j: S1Jet) -> np.ndarray:
    return np.array([hessian_norm_sq(j, j.vs[a], j.vss[a]) for a in range(j.v.shape[0])])


def _runs(mask):
    """Maximal runs of True in a periodic boolean array, as (start, length)."""
    M = mask.size
    if mask.all():
        return [(0, M)]
    if not mask.any():
        return []
    k0 = int(np.argmin(mask))  # a False entry
    rolled = np.roll(mask, -k0)
    runs = []
    i = 0
    while i < M:
        if rolled[i]:
            j = i
            while j < M and rolled[j]:
                j += 1
            runs.append(((i + k0) % M, j - i))
            i = j
        else:
            i += 1
    return runs


def neck_halfwidth(v1: np.ndarray, k: int) -> float:
    """Cells from the minimum at k to the nearest point where v1 ≥ 2 v1[k] (averaged over both sides)."""
    M = v1.size
    target = 2.0 * v1[k]
    widths = []
    for step in (1, -1):
        for d in range(1, M // 2):
            if v1[(k + step * d) % M] >= target:
                widths.append(d)
                break
        else:
            widths.append(M // 2)
    return float(np.mean(widths))


# ---------------------------------------------------------------------------
# per-step record
# ---------------------------------------------------------------------------


@dataclass
class NeckQuantities:
    Q: float
    P: float
    Qcal: float
    Pcal: float
    F: np.ndarray
    L: np.ndarray
    Omega: list
    B: float


def neck_quantities(state: FlowStateS1, T_hat: float | None = None, delta: float = DELTA_OMEGA,
                    beta: float = BETA) -> NeckQuantities:
    """Q, P, 𝒬, 𝒫 (spatial minima), F field, L field (NaN off Ω) and Ω as θ-index runs.

    On a one-dimensional base Q = log Π v_a^{2n_a} and 𝒬 = 2Σ n_a log v_a coincide.
    T_hat is accepted for interface symmetry; none of these quantities need it.
    """
    j = s1_jet(state)
    logprod = 2 * np.einsum("a,a...->...", j.ns, np.log(j.v))
    Q = float(logprod.min())
    grad_sq = j.vs**2
    B = beta * float(grad_sq.max())
    ch = chi(j)
    F = np.sum((B + grad_sq) * ch, axis=0)
    v1, v1ss = j.v[0], j.vss[0]
    # (v₁)ₛₛ below the stencil roundoff floor counts as zero
    floor = VSS_ROUNDOFF * np.abs(v1).max() / float(np.min(state.phi) * state.h) ** 2
    v1ss = np.where(np.abs(v1ss) > floor, v1ss, 0.0)
    raw = v1ss * np.log(v1 / delta) < 0
    # the sign condition also holds on concave stretches with v₁ > δ; keep only components around a neck
    minima = (v1 <= np.roll(v1, 1)) & (v1 <= np.roll(v1, -1))
    M = v1.size
    omega = [(i, n) for i, n in _runs(raw) if minima[(i + np.arange(n)) % M].any()]
    mask = np.zeros(M, bool)
    for i, n in omega:
        mask[(i + np.arange(n)) % M] = True
    L = np.where(mask, v1 * v1ss * np.log(v1), np.nan)
    return NeckQuantities(Q, float(np.exp(Q / 2)), Q, float(np.exp(Q / 2)), F, L, omega, B)


def step_record(state: FlowStateS1, delta: float = DELTA_OMEGA, beta: float = BETA) -> MonitorRecord:
    j = s1_jet(state)
    nq = neck_quantities(state, None, delta, beta)
    ch = chi(j)
    blocks = geometry.blocks_from_jet(geometry.jet(state, j.geom))
    flat = range(1, len(state.fibers))
    rm_sq, sig = geometry.riemann_norm_sq(blocks, flat)
    k = int(np.argmin(state.v[0]))
    lam1 = state.fibers[0].lambda_hat
    Z = (j.mu[:, None] + j.vs**2) / j.v
    Lvals = nq.L[np.isfinite(nq.L)]
    omega_cells = sum(n for _, n in nq.Omega)
    return MonitorRecord(
        t=state.t,
        vmax=state.v.max(axis=1),
        vmin=state.v.min(axis=1),
        grad_sq_max=(j.vs**2).max(axis=1),
        Q=nq.Q,
        P=nq.P,
        Qcal=nq.Qcal,
        Pcal=nq.Pcal,
        F_max=float(nq.F.max()),
        chi_max=ch.max(axis=1),
        B_const=nq.B,
        L_min_on_Omega=float(Lvals.min()) if Lvals.size else 0.0,
        Omega_extent=float(j.geom.integrate(np.where(np.isfinite(nq.L), 1.0, 0.0))) if omega_cells else 0.0,
        Z_max=Z.max(axis=1),
        rm_max=float(np.sqrt(rm_sq.max())),
        sigma_fl_max=float(sig.max()),
        neck_index=k,
        v_neck=float(state.v[0, k]),
        kappa0=float(-j.vss[0, k] / j.v[0, k]),
        kappa1=float((lam1 - j.vs[0, k] ** 2) / j.v[0, k] ** 2),
        neck_halfwidth_cells=neck_halfwidth(state.v[0], k),
    )


# ---------------------------------------------------------------------------
# maximum principle
# ---------------------------------------------------------------------------


@dataclass
class MaxPrincipleResult:
    vmax_ok: bool
    grad_ok: bool
    vmax_excess: float
    grad_excess: float

    @property
    def ok(self):
        return self.vmax_ok and self.grad_ok


def maximum_principle_check(record: MonitorRecord, record_prev: MonitorRecord, initial: MonitorRecord,
                            fibers) -> MaxPrincipleResult:
    """vmax non-increasing (relative 1e-10) and |∇v_a|² ≤ max(initial, μ_a/(n_a-1)) + 1e-6."""
    vex = float(np.max((record.vmax - record_prev.vmax) / record_prev.vmax))
    bound = np.maximum(initial.grad_sq_max, [f.lambda_hat for f in fibers]) + GRAD_ATOL
    gex = float(np.max(record.grad_sq_max - bound))
    return MaxPrincipleResult(vex <= VMAX_RTOL, gex <= 0.0, vex, gex)


def maximum_principle_sweep(records, fibers):
    """Violation counts over a whole run."""
    res = [maximum_principle_check(r, p, records[0], fibers) for p, r in zip(records[:-1], records[1:])]
    return {
        "steps": len(res),
        "vmax_violations": int(sum(not r.vmax_ok for r in res)),
        "grad_violations": int(sum(not r.grad_ok for r in res)),
        "worst_vmax_excess": max((r.vmax_excess for r in res), default=0.0),
        "worst_grad_excess": max((r.grad_excess for r in res), default=0.0),
    }


# ---------------------------------------------------------------------------
# Type-I scaling and rescaled curvature
# ---------------------------------------------------------------------------


@dataclass
class ProfileCheck:
    neck_theta: float
    sigma: np.ndarray
    v1: np.ndarray
    inner_margin: float
    outer_margin: float
    C: float
    delta: float


def resolved_window(records, min_cells: float = 8.0):
    """Index of the last record whose neck spans at least ``min_cells`` cells on each side."""
    ok = [i for i, r in enumerate(records) if r.neck_halfwidth_cells >= min_cells]
    if not ok:
        raise InsufficientData("neck is never resolved")
    return ok[-1]


def final_resolved_decade(records, T_hat: float, min_cells: float = 8.0):
    """Indices with T̂ - t in [τ_r, 10 τ_r], τ_r = T̂ - t at the last resolved record."""
    last = resolved_window(records, min_cells)
    tau_r = T_hat - records[last].t
    if tau_r <= 0:
        raise InsufficientData("resolved window extends past T̂")
    idx = [i for i, r in enumerate(records) if tau_r <= T_hat - r.t <= 10 * tau_r]
    if len(idx) < 10:
        raise InsufficientData(f"only {len(idx)} records in the final resolved decade")
    return idx


def fill_rescaled(records, T_hat: float):
    for r in records:
        tau = T_hat - r.t
        r.typeI_ratio = tau * r.rm_max
        r.vmin_sq_over_Tt = float(r.vmin.min() ** 2 / tau) if tau > 0 else float("nan")
        r.kappa0_rescaled = tau * r.kappa0
        r.kappa1_rescaled = tau * r.kappa1
        r.Sigma_fl_rescaled = tau**2 * r.sigma_fl_max
    return records


def profile_check(state: FlowStateS1, T_hat: float, C: float | None = None, delta: float = 0.1):
    """Radius bounds around the neck, with τ = T̂ - t and λ = -log τ:

      parabolic    |σ| ≤ 2√(τλ):          v₁ ≤ √(2(n₁-1)τ) + C σ² / (λ √τ)
      intermediate 2√(τλ) ≤ |σ| ≤ τ^{½-δ}: v₁ ≤ C |σ| / √λ · √(log(|σ| / √(τλ)))

    C is fitted as the smallest constant satisfying both on the sampled
    profile; margins are (bound - value) with that C (or the one supplied).
    """
    tau = T_hat - state.t
    if not 0 < tau < 1:
        raise InsufficientData("profile check needs 0 < T̂ - t < 1")
    n1 = state.fibers[0].n
    k = int(np.argmin(state.v[0]))
    ds = state.phi * state.h
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (ds + np.roll(ds, -1)))])[:-1]
    length = float(np.sum(ds))
    sigma = (cum - cum[k] + length / 2) % length - length / 2
    v1 = state.v[0]
    lam = -np.log(tau)
    r_par = 2 * np.sqrt(tau * lam)
    base = np.sqrt(2 * (n1 - 1) * tau)
    a = np.abs(sigma)
    inner = (a <= r_par) & (a > 0)
    outer = (a > r_par) & (a <= tau ** (0.5 - delta))
    w_in = a[inner] ** 2 / (lam * np.sqrt(tau))
    w_out = a[outer] / np.sqrt(lam) * np.sqrt(np.log(a[outer] / np.sqrt(tau * lam)))
    c_in = np.max((v1[inner] - base) / w_in) if inner.any() else 0.0
    c_out = np.max(v1[outer] / w_out) if outer.any() else 0.0
    Cfit = float(max(c_in, c_out, 0.0))
    if C is None:
        C = Cfit
    inner_margin = float(np.min(base + C * w_in - v1[inner])) if inner.any() else 0.0
    outer_margin = float(np.min(C * w_out - v1[outer])) if outer.any() else 0.0
    return ProfileCheck(float(state.theta[k]), sigma, v1.copy(), inner_margin, outer_margin, Cfit, delta)


@dataclass
class TypeIReport:
    indices: list
    typeI_ratio: np.ndarray
    neck_ratio: np.ndarray
    kappa0_rescaled: np.ndarray
    kappa1_rescaled: np.ndarray
    sigma_fl_rescaled: np.ndarray
    profile: ProfileCheck | None = None


def typeI_and_rescale(records, T_hat: float, n1: int, final_state: FlowStateS1 | None = None,
                      min_cells: float = 8.0) -> TypeIReport:
    fill_rescaled(records, T_hat)
    idx = final_resolved_decade(records, T_hat, min_cells)
    tau = np.array([T_hat - records[i].t for i in idx])
    vneck = np.array([records[i].v_neck for i in idx])
    prof = profile_check(final_state, T_hat) if final_state is not None else None
    return TypeIReport(
        idx,
        np.array([records[i].typeI_ratio for i in idx]),
        vneck / np.sqrt(2 * (n1 - 1) * tau),
        np.array([records[i].kappa0_rescaled for i in idx]),
        np.array([records[i].kappa1_rescaled for i in idx]),
        np.array([r.Sigma_fl_rescaled for r in records]),
        prof,
    )


def fit_lower_constant(times, values, T_hat, power=1.0):
    """Largest c with values ≥ c (T̂ - t)^power over the given samples."""
    tau = T_hat - np.asarray(times)
    ok = tau > 0
    return float(np.min(np.asarray(values)[ok] / tau[ok] ** power))


def fit_upper_constant(times, values, T_hat, power=1.0):
    """Smallest C with values ≤ C / (T̂ - t)^power over the given samples."""
    tau = T_hat - np.asarray(times)
    ok = tau > 0
    return float(np.max(np.asarray(values)[ok] * tau[ok] ** power))


# ---------------------------------------------------------------------------
# Hessian evolution residual
# ---------------------------------------------------------------------------


@dataclass
class HessianResidual:
    times: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    scale: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.max(self.l2))


def hessian_rhs(state: FlowStateS1, a: int, z_sign: float = 1.0,
                base_fiber_coeff: float = 8.0) -> np.ndarray:
    """Right-hand side of the χ_a evolution on a one-dimensional base (no base curvature).

    ``base_fiber_coeff`` multiplies Σ_b n_b v_b⁻² ⟨∇v_b,∇v_a⟩⟨∇̌²v_b,∇̌²v_a⟩ (entering with a minus sign).
    """
    j = s1_jet(state)
    geom = j.geom
    v, vs, vss, vsss, ns, mu = j.v, j.vs, j.vss, j.vsss, j.ns, j.mu
    q = vs / v  # (v_b)_s / v_b
    ch = hessian_norm_sq(j, vs[a], vss[a])
    lap_chi = geom.dss(ch) + np.einsum("b,b...->...", ns, q) * geom.ds(ch)
    # |∇³v_a|²
    psi = q * vs[a]  # ψ_b = (v_b)_s (v_a)_s / v_b
    psi_s = np.array([geom.ds(p) for p in psi])
    E = q * (vss[a] - psi)
    nabla3 = vsss[a] ** 2 + np.einsum("b,b...->...", ns, psi_s**2 + 2 * E**2)
    # ⟨∇²v_a, ∇²Z_a⟩
    Z = z_sign * (mu[a] + vs[a] ** 2) / v[a]
    Zs, Zss = geom.ds(Z), geom.dss(Z)
    hz = vss[a] * Zss + np.einsum("b,b...->...", ns, psi * q * Zs)
    inner = vs * vs[a]  # ⟨∇v_b, ∇v_a⟩
    t_bf = -base_fiber_coeff * np.einsum("b,b...->...", ns, inner * vss * vss[a] / v**2)
    t_mu = 4 * np.einsum("b,b...->...", ns, (mu[:, None] - (ns[:, None] - 1) * vs**2) * inner**2 / v**4)
    A = v.shape[0]
    t_cc = np.zeros_like(ch)
    for b in range(A):
        for c in range(A):
            if b != c:
                t_cc -= 4 * ns[b] * ns[c] * (vs[b] * vs[c]) * inner[b] * inner[c] / (v[b] ** 2 * v[c] ** 2)
    return lap_chi - 2 * nabla3 - 2 * hz + t_bf + t_mu + t_cc


def verify_hessian_evolution(states, a: int = 0, z_sign: float = 1.0,
                             base_fiber_coeff: float = 8.0) -> HessianResidual:
    """Residual of χ_a evolution at each interior state, ∂_t by three-point differences.

    ``states`` must be consecutive time levels of one run (any spacing).
    """
    if len(states) < 3:
        raise InsufficientData("need at least three consecutive states")
    times, l2, linf, scale = [], [], [], []
    chis = [chi(s1_jet(s))[a] for s in states]
    for k in range(1, len(states) - 1):
        t0, t1, t2 = states[k - 1].t, states[k].t, states[k + 1].t
        h0, h1 = t1 - t0, t2 - t1
        dchi = (
            -h1 / (h0 * (h0 + h1)) * chis[k - 1]
            + (h1 - h0) / (h0 * h1) * chis[k]
            + h0 / (h1 * (h0 + h1)) * chis[k + 1]
        )
        rhs = hessian_rhs(states[k], a, z_sign, base_fiber_coeff)
        r = dchi - rhs
        geom = geometry.CircleGeometry(states[k].phi, states[k].h)
        times.append(t1)
        l2.append(np.sqrt(geom.integrate(r**2)))
        linf.append(np.abs(r).max())
        scale.append(np.sqrt(geom.integrate(dchi**2)))
    return HessianResidual(np.array(times), np.array(l2), np.array(linf), np.array(scale))


def hessian_refinement(profiles, fibers, levels=((64, 1e-3), (128, 5e-4), (256, 2.5e-4)),
                       t_eval: float = 0.01, a: int = 0, z_sign: float = 1.0,
                       base_fiber_coeff: float = 8.0):
    """L2 residual of the χ_a evolution at t_eval for each (M, Δt) level, plus successive ratios."""
    from .flow_s1 import S1Config, run_s1

    norms = []
    for M, dt in levels:
        n = int(round(t_eval / dt))
        cfg = S1Config(M=M, fibers=tuple(fibers), profiles=tuple(profiles), dt_fixed=dt,
                       t_end=(n + 1) * dt, snapshot_every=1, monitor=False)
        snaps = run_s1(cfg).snapshots
        res = verify_hessian_evolution(snaps[n - 1:n + 2], a, z_sign, base_fiber_coeff)
        norms.append(float(res.l2[0]))
    ratios = [p / q for p, q in zip(norms, norms[1:])]
    return norms, ratios
