import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import S2, S3, circle_state
from warpflow import monitors
from warpflow.errors import InsufficientData
from warpflow.flow_s1 import Profile, S1Config, run_s1
from warpflow.state import FiberSpec

INHOM = (Profile("cosine", 1.0, 0.2), Profile("cosine", 1.5, 0.1, 2, -np.pi / 2))
FIBERS = (S2, FiberSpec(3, 2.0))


def homogeneous_run(**kw):
    return run_s1(S1Config(M=32, profiles=(Profile("constant", 1.0),), **kw))


def test_max_principle_homogeneous():
    tr = homogeneous_run()
    sw = monitors.maximum_principle_sweep(tr.records, tr.final.fibers)
    assert sw["steps"] > 100
    assert sw["vmax_violations"] == 0 and sw["grad_violations"] == 0


def test_max_principle_fault_injection():
    def bump(state, step):
        if step == 10:
            state.v *= 1.01
        return state

    cfg = S1Config(M=64, profiles=(Profile("cosine", 1.0, 0.2),), t_end=0.05)
    tr = run_s1(cfg, hooks=[bump])
    sw = monitors.maximum_principle_sweep(tr.records, cfg.fibers)
    assert sw["vmax_violations"] == 1
    # 1% bump less one step of natural decay
    assert 0.005 < sw["worst_vmax_excess"] <= 0.01


def test_max_principle_gradient_bound():
    s0 = circle_state([lambda t: 1 + 0.2 * np.cos(t)], [S2], M=64)
    r0 = monitors.step_record(s0)
    r1 = monitors.step_record(s0)
    r1.grad_sq_max = r1.grad_sq_max + 1.0  # above max(initial, λ̂=1)
    res = monitors.maximum_principle_check(r1, r0, r0, [S2])
    assert res.vmax_ok and not res.grad_ok and not res.ok


def test_cylinder_neck_quantities():
    s = circle_state([lambda t: 0.8 + 0 * t], [S2], M=64)
    nq = monitors.neck_quantities(s)
    assert nq.Omega == []
    assert np.all(np.isnan(nq.L))
    assert monitors.step_record(s).L_min_on_Omega == 0.0
    assert nq.Q == pytest.approx(4 * np.log(0.8), rel=1e-14)
    assert nq.P == np.exp(nq.Q / 2)


def test_dumbbell_one_interval_per_neck():
    # necks at θ = π/2 and 3π/2 with v₁ < δ; the bulbs are excluded from Ω
    M = 256
    s = circle_state([lambda t: 0.5 + 0.45 * np.cos(2 * t)], [S2], M=M)
    nq = monitors.neck_quantities(s)
    assert len(nq.Omega) == 2
    centers = sorted(s.theta[(start + n // 2) % M] for start, n in nq.Omega)
    assert centers == pytest.approx([np.pi / 2, 3 * np.pi / 2], abs=2 * np.pi / M)
    inside = np.isfinite(nq.L)
    assert np.all(s.v[0][inside] < monitors.DELTA_OMEGA)


def _boundary_L(s, nq):
    M = s.v.shape[1]
    v, vss = s.v[0], monitors.s1_jet(s).vss[0]
    g = vss * np.log(v / monitors.DELTA_OMEGA)
    L = v * vss * np.log(v)
    out = []
    for start, n in nq.Omega:
        for inside, outside in ((start, start - 1), (start + n - 1, start + n)):
            i, o = inside % M, outside % M
            w = g[i] / (g[i] - g[o])
            out.append(((1 - w) * L[i] + w * L[o]) / np.abs(L[np.isfinite(nq.L)]).max())
    return np.array(out)


def test_L_vanishes_at_omega_boundary():
    # inflection points below δ: each endpoint is a zero of (v₁)ₛₛ
    s = circle_state([lambda t: 0.05 + 0.04 * np.cos(2 * t)], [S2], M=512)
    nq = monitors.neck_quantities(s)
    assert len(nq.Omega) == 2
    assert np.abs(_boundary_L(s, nq)).max() <= 1e-4


def test_L_nonzero_where_omega_ends_at_delta():
    # when v₁ reaches δ while still convex the endpoint sits at v₁ = δ and L = δ (v₁)ₛₛ log δ ≠ 0
    s = circle_state([lambda t: 0.5 + 0.45 * np.cos(2 * t)], [S2], M=512)
    nq = monitors.neck_quantities(s)
    assert np.abs(_boundary_L(s, nq)).min() > 0.1


def test_F_dominates_pointwise_B_chi():
    s = circle_state([lambda t: 1 + 0.2 * np.cos(t), lambda t: 1.5 + 0.1 * np.sin(2 * t)], list(FIBERS), M=128)
    nq = monitors.neck_quantities(s)
    ch = monitors.chi(monitors.s1_jet(s))
    assert np.all(nq.F >= nq.B * ch.max(axis=0) - 1e-14)


def test_homogeneous_rescaled_curvatures_exact():
    # exact solution v = √(1 - 2t), T = ½: κ̃₁ = ½ and κ̃₀ = 0
    recs = [monitors.step_record(circle_state([lambda x, t=t: np.sqrt(1 - 2 * t) + 0 * x], [S2], M=32, t=t))
            for t in (0.0, 0.1, 0.3, 0.49, 0.4999)]
    monitors.fill_rescaled(recs, 0.5)
    np.testing.assert_allclose([r.kappa1_rescaled for r in recs], 0.5, rtol=1e-12)
    np.testing.assert_allclose([r.kappa0_rescaled for r in recs], 0.0, atol=1e-12)
    np.testing.assert_allclose([r.vmin_sq_over_Tt for r in recs], 2.0, rtol=1e-12)


def test_homogeneous_rescaled_curvatures_run():
    tr = homogeneous_run()
    monitors.fill_rescaled(tr.records, 0.5)
    sel = [r for r in tr.records if 0.5 - r.t > 1e-2]
    np.testing.assert_allclose([r.kappa1_rescaled for r in sel], 0.5, rtol=1e-6)
    np.testing.assert_allclose([r.kappa0_rescaled for r in sel], 0.0, atol=1e-9)


def test_typeI_needs_resolved_neck():
    tr = homogeneous_run()
    # a flat profile never has a neck of finite half-width
    for r in tr.records:
        r.neck_halfwidth_cells = 0.0
    with pytest.raises(InsufficientData):
        monitors.typeI_and_rescale(tr.records, 0.5, 2)


def test_fit_constants():
    t = np.linspace(0, 0.9, 10)
    assert monitors.fit_lower_constant(t, 3 * (1 - t), 1.0) == pytest.approx(3.0)
    assert monitors.fit_upper_constant(t, 2 / (1 - t), 1.0) == pytest.approx(2.0)


def test_hessian_homogeneous_residual():
    cfg = S1Config(M=32, fibers=(S2, S3), profiles=(Profile("constant", 1.0), Profile("constant", 1.3)),
                   dt_fixed=1e-3, t_end=5e-3, snapshot_every=1, monitor=False)
    res = monitors.verify_hessian_evolution(run_s1(cfg).snapshots)
    assert res.norm <= 1e-10


def test_hessian_refinement_converges():
    norms, ratios = monitors.hessian_refinement(INHOM, FIBERS)
    assert norms[-1] < 1e-6
    assert min(ratios) >= 3.5


def test_hessian_literal_coefficient_does_not_converge():
    # the collected formula with base-fiber coefficient 4 leaves an O(1%) residual
    norms, ratios = monitors.hessian_refinement(INHOM, FIBERS, base_fiber_coeff=4.0)
    assert max(ratios) < 1.01
    assert norms[-1] > 1e-3


def test_hessian_wrong_Z_sign_fails():
    norms, ratios = monitors.hessian_refinement(INHOM, FIBERS, z_sign=-1.0)
    assert norms[-1] > 0.1
    assert max(ratios) < 3.5


def test_hessian_needs_three_states():
    s = circle_state([lambda t: 1 + 0.1 * np.cos(t)], [S2], M=32)
    with pytest.raises(InsufficientData):
        monitors.verify_hessian_evolution([s, s])


@settings(max_examples=25, deadline=None)
@given(a=st.floats(0.3, 2.0), b=st.floats(0.0, 0.9), k=st.integers(1, 3))
def test_record_invariants(a, b, k):
    s = circle_state([lambda t: a * (1 + b * np.cos(k * t)) + 0.01, lambda t: 2.0 + 0 * t], list(FIBERS), M=64)
    r = monitors.step_record(s)
    assert r.P == np.exp(r.Q / 2) and r.Pcal == np.exp(r.Qcal / 2)
    assert r.Q == r.Qcal
    assert r.Omega_extent >= 0
    assert (r.Omega_extent == 0) == (r.L_min_on_Omega == 0.0 and not monitors.neck_quantities(s).Omega)
    assert r.v_neck == r.vmin[0]
    nq = monitors.neck_quantities(s)
    for start, n in nq.Omega:
        assert 0 < n < 64
