import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import S2, S3, torus_state
from warpflow import flow_surface as fs
from warpflow import geometry
from warpflow.errors import DegenerateMetric, InsufficientData, InvalidConfig
from warpflow.flow_surface import BaseMetricFamily, SurfaceConfig, SurfaceProfile

TWO_D = SurfaceProfile("trig", 0.8, terms=((0.15, 1, 0, 0.0), (0.1, 0, 1, 0.3), (0.05, 1, 1, 0.0)))
BUMPY = BaseMetricFamily("conformal", 0.1, 1, 1)


def grid(M):
    x = np.arange(M) * (2 * np.pi / M)
    return np.meshgrid(x, x, indexing="ij")


def test_flat_curvature_zero():
    X, _ = grid(32)
    g = np.array(BaseMetricFamily()(X, X))
    np.testing.assert_allclose(fs.base_scalar_curvature_2d(g, (2 * np.pi / 32,) * 2), 0.0, atol=1e-14)


def test_conformal_curvature():
    errs = []
    for M in (32, 64, 128):
        X, Y = grid(M)
        geom = geometry.SurfaceGeometry(BaseMetricFamily("conformal", 0.1)(X, Y), (2 * np.pi / M,) * 2)
        exact = 0.2 * np.exp(-0.2 * np.sin(X)) * np.sin(X)
        errs.append(np.abs(geom.scalar_curvature - exact).max())
        # the second-derivative formula agrees to the same order
        assert np.abs(geom.scalar_curvature_pointwise - exact).max() <= errs[-1]
    assert errs[-1] <= 1e-6
    assert errs[0] / errs[1] > 12 and errs[1] / errs[2] > 12


def test_gauss_bonnet_random_metrics(rng):
    M = 64
    X, Y = grid(M)
    for _ in range(3):
        c = rng.uniform(-0.15, 0.15, size=4)
        u = c[0] * np.sin(X + 0.3) + c[1] * np.cos(2 * Y) + c[2] * np.sin(X + Y)
        g12 = c[3] * np.sin(X - Y)
        g = np.array([np.exp(2 * u), g12, np.exp(2 * u) * (1 + 0.2 * np.cos(Y))])
        geom = geometry.SurfaceGeometry(g, (2 * np.pi / M,) * 2)
        assert abs(geom.integrate(geom.scalar_curvature)) <= 1e-12


def test_degenerate_metric():
    X, _ = grid(16)
    g = np.array([np.ones_like(X), np.ones_like(X), np.ones_like(X)])
    with pytest.raises(DegenerateMetric):
        fs.base_scalar_curvature_2d(g, (2 * np.pi / 16,) * 2)


def test_rhs_constant_warping():
    s = torus_state([lambda x, y: np.log(1.2) + 0 * x], [S3], M=16)
    dg, dw = fs.rhs_surface(s)
    np.testing.assert_allclose(dg, 0.0, atol=1e-14)
    np.testing.assert_allclose(dw[0], -S3.mu / 1.44, rtol=1e-13)


def test_rhs_point_value():
    M = 128
    s = torus_state([lambda x, y: 0.1 * np.sin(x)], [S2], M=M)
    dg, dw = fs.rhs_surface(s)
    i = M // 4  # x = π/2
    assert dw[0][i, 7] == pytest.approx(-0.1 - np.exp(-0.2), abs=1e-8)
    assert dg[0][i, 7] == pytest.approx(0.0, abs=1e-12)
    # away from π/2 the source 2 n (w_x)² appears in g₁₁ only
    assert dg[0][0, 7] == pytest.approx(4 * 0.01, rel=1e-6)
    np.testing.assert_allclose(dg[1:], 0.0, atol=1e-12)


def test_homogeneous_torus_run():
    cfg = SurfaceConfig(M=16, fibers=(S2, S3), profiles=(SurfaceProfile("constant", 1.0), SurfaceProfile("constant", 2.0)))
    tr = fs.run_surface(cfg)
    assert tr.reason == "eps_stop"
    assert tr.final.t == pytest.approx(0.5, abs=1e-4)
    np.testing.assert_allclose(tr.final.g[0], 1.0, atol=1e-13)
    np.testing.assert_allclose(tr.final.g[1], 0.0, atol=1e-13)
    np.testing.assert_allclose(tr.series.gauss_bonnet, 0.0, atol=1e-12)


def test_homogeneous_exact_w():
    cfg = SurfaceConfig(M=16, profiles=(SurfaceProfile("constant", 1.0),), output_times=(0.3,), t_end=0.31)
    w = fs.run_surface(cfg).outputs[0.3].w[0]
    np.testing.assert_allclose(w, 0.5 * np.log(1 - 0.6), rtol=1e-7)


def test_homogeneous_R_evolution_residual():
    cfg = SurfaceConfig(M=16, fibers=(S2,), profiles=(SurfaceProfile("constant", 1.0),),
                        dt_fixed=1e-3, t_end=4e-3, snapshot_every=1, monitor=False)
    res = fs.verify_R_evolution(fs.run_surface(cfg).snapshots)
    assert res.norm <= 1e-10
    assert np.max(res.uhlenbeck_l2) <= 1e-10


def test_R_evolution_converges():
    out = fs.r_evolution_refinement(SurfaceConfig(fibers=(S2,), profiles=(TWO_D,), base_metric=BUMPY))
    assert min(out["R_ratios"]) >= 3.5
    assert out["R_norms"][-1] < 1e-4


def test_uhlenbeck_identity_does_not_converge():
    # the component identity needs a parallel eigenframe; on warped data it leaves an O(1) residual
    out = fs.r_evolution_refinement(SurfaceConfig(fibers=(S2,), profiles=(TWO_D,), base_metric=BUMPY))
    assert out["uhlenbeck_norms"][-1] > 1.0
    assert max(out["uhlenbeck_ratios"]) < 1.01


def test_uhlenbeck_counterexample_flat_base():
    # w = w(x) on a flat torus keeps Ř ≡ 0, yet the identity's right side is positive
    s = torus_state([lambda x, y: np.log(0.8 + 0.15 * np.sin(x))], [S2], M=64)
    rhs = fs.uhlenbeck_rhs(s)
    assert np.abs(geometry.SurfaceGeometry(s.g, s.h).scalar_curvature).max() <= 1e-12
    assert rhs.max() > 0.1


def test_verify_needs_three_states():
    s = torus_state([lambda x, y: 0 * x], [S2], M=16)
    with pytest.raises(InsufficientData):
        fs.verify_R_evolution([s, s])


def test_init_rejects():
    with pytest.raises(InvalidConfig, match="M ≥ 16"):
        fs.init_surface(SurfaceConfig(M=8))
    with pytest.raises(InvalidConfig, match="positive"):
        fs.init_surface(SurfaceConfig(profiles=(SurfaceProfile("sine", 0.1, 0.2),)))
    with pytest.raises(InvalidConfig, match="one initial profile"):
        fs.init_surface(SurfaceConfig(fibers=(S2, S3)))


def test_tame_report():
    _, rep = fs.init_surface(SurfaceConfig(M=32))
    assert rep.f_upper_max0 == pytest.approx(0.0, abs=1e-12) and rep.eta_tame
    # M = 72 puts the steepest point 3x = 7π/6 on the grid
    _, rep = fs.init_surface(SurfaceConfig(M=72, profiles=(SurfaceProfile("sine", 1.0, 0.5, 3),), eta=0.1))
    # flat base, f = 2p = 2n max (w_x)², and max |cos θ/(1 + a sin θ)| = 1/√(1 - a²)
    assert rep.f_upper_max0 == pytest.approx(2 * 2 * 1.5**2 / 0.75, rel=1e-3)
    assert not rep.eta_tame


@pytest.fixture(scope="module")
def pinch():
    cfg = SurfaceConfig(M=32, fibers=(S2, S3),
                        profiles=(SurfaceProfile("sine", 0.8, 0.15), SurfaceProfile("constant", 2.0)))
    return fs.run_surface(cfg)


def test_pinch_run_monitors(pinch):
    s = pinch.series.as_arrays()
    assert pinch.reason == "eps_stop"
    assert np.abs(s["gauss_bonnet"]).max() <= 1e-6
    # area never decreases on the torus
    assert np.all(np.diff(s["area"]) >= -1e-8)
    assert np.all(s["area_rate"] >= -1e-8)
    c = pinch.fitted_constants()
    assert c["C0"] >= s["f_upper_max"][0]
    v1 = np.array([v[0] for v in s["vmin"]])
    assert np.all(s["f_upper_max"] <= np.maximum(c["C0"], 2 / (3 * v1**2)) * (1 + 1e-12))


def test_snapshot_written(tmp_path):
    s = torus_state([lambda x, y: 0.1 * np.sin(x + y)], [S2], M=16, t=0.25)
    fs.write_snapshot(tmp_path / "s.txt", s)
    data = np.loadtxt(tmp_path / "s.txt")
    assert data.shape == (256, 6)
    np.testing.assert_array_equal(data[:, 5], s.w[0].ravel())


@settings(max_examples=15, deadline=None)
@given(b=st.floats(0.0, 0.3), kx=st.integers(0, 2), ky=st.integers(0, 2), amp=st.floats(0.0, 0.15))
def test_gauss_bonnet_preserved(b, kx, ky, amp):
    cfg = SurfaceConfig(M=32, profiles=(SurfaceProfile("sine", 1.0, b, kx, ky),),
                        base_metric=BaseMetricFamily("conformal", amp, 1, 1), t_end=0.005)
    s = fs.run_surface(cfg).series.as_arrays()
    assert np.abs(s["gauss_bonnet"]).max() <= 1e-6
