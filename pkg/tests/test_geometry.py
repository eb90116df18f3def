import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import S2, S3, circle_state, torus_state
from warpflow import fd_oracle, flow_s1, geometry
from warpflow.chart import ChartPoint, random_chart_point
from warpflow.errors import ChartSingularity, DimensionMismatch, NonPositiveWarping
from warpflow.state import BaseKind, FiberSpec


def const(c):
    return lambda *x: c + 0 * x[0]


def test_round_cylinder_scalar():
    b = geometry.curvature_blocks(circle_state([const(1.0)], [S2], M=32))
    np.testing.assert_allclose(b.scalar_R, 2.0, atol=1e-13)
    assert np.all(b.kappa_fiber_cross == 0)
    np.testing.assert_allclose(b.base_fiber_block, 0.0, atol=1e-13)


def test_two_unit_fibers_scalar():
    b = geometry.curvature_blocks(circle_state([const(1.0), const(1.0)], [S2, S3], M=32))
    np.testing.assert_allclose(b.scalar_R, 8.0, atol=1e-13)


def test_fiber_cross_value():
    M = 256
    st_ = circle_state([lambda t: 1 + 0.1 * np.sin(t), lambda t: 1 + 0.1 * np.cos(t)], [S2, S3], M=M)
    b = geometry.curvature_blocks(st_)
    k = M // 8  # theta = pi/4
    expected = 0.005 / (1 + 0.05 * np.sqrt(2)) ** 2
    assert expected == pytest.approx(4.362e-3, rel=2e-4)
    assert b.kappa_fiber_cross[0, 1, k] == pytest.approx(expected, rel=1e-7)
    assert b.kappa_fiber_cross[1, 0, k] == b.kappa_fiber_cross[0, 1, k]


def test_fiber_cross_value_matches_oracle():
    # the same data pushed through the brute-force chart curvature
    data = fd_oracle.SmoothWarpedData(
        BaseKind.CIRCLE, (S2, S3),
        (lambda t: 1 + 0.1 * np.sin(t), lambda t: 1 + 0.1 * np.cos(t)), lambda t: 1.0 + 0 * t,
    )
    point = ChartPoint((np.pi / 4,), ((1.1, 0.4), (1.0, 2.0, 0.3)))
    R = fd_oracle.riemann_fd(data, point).in_frame()
    # one direction in each fiber: R_{abba} is the sectional curvature
    assert R[1, 3, 3, 1] == pytest.approx(0.005 / (1 + 0.05 * np.sqrt(2)) ** 2, rel=1e-6)


@pytest.mark.parametrize("v", [0.7, 1.0, 1.9])
def test_cylinder_riemann_norm(v):
    b = geometry.curvature_blocks(circle_state([const(v)], [S2], M=16))
    np.testing.assert_allclose(b.riemann_norm_sq, 4 / v**4, rtol=1e-13)


def test_flat_torus_norm_is_self_blocks_only():
    fibers = [S2, S3]
    b = geometry.curvature_blocks(torus_state([const(0.0), const(np.log(1.3))], fibers, M=16))
    expected = 2 * 2 * 1 / 1.0**4 + 2 * 3 * 2 / 1.3**4
    np.testing.assert_allclose(b.riemann_norm_sq, expected, rtol=1e-12)


def test_operators_constant_vanish():
    s = circle_state([lambda t: 1 + 0.2 * np.sin(t)], [S2], M=64)
    ops = geometry.operators(np.full(64, 3.0), s)
    for arr in (ops.base_hessian, ops.laplacian, ops.tensor_norm_sq):
        np.testing.assert_allclose(arr, 0.0, atol=1e-12)


def test_laplacian_single_constant_fiber():
    s = circle_state([const(1.0)], [S2], M=128)
    lap = geometry.full_laplacian(np.sin(s.theta), s)
    np.testing.assert_allclose(lap, -np.sin(s.theta), atol=1e-7)


def test_laplacian_of_warping_at_zero():
    s = circle_state([lambda t: 1 + 0.2 * np.sin(t)], [S2], M=256)
    lap = geometry.full_laplacian(s.v[0], s)
    assert lap[0] == pytest.approx(0.08, abs=1e-8)


def test_christoffel_constant_warpings_no_mixed_terms(rng):
    s = circle_state([const(1.2), const(0.8)], [S2, S3], M=32)
    p = random_chart_point(rng, (s.theta[5],), [2, 3])
    G = geometry.christoffel_closed(s, p)
    np.testing.assert_allclose(G[1:, 0, 1:], 0.0, atol=1e-14)
    np.testing.assert_allclose(G[0, 1:, 1:], 0.0, atol=1e-14)


def test_christoffel_mixed_at_zero(rng):
    s = circle_state([lambda t: 1 + 0.1 * np.sin(t)], [S2], M=256)
    p = random_chart_point(rng, (0.0,), [2])
    G = geometry.christoffel_closed(s, p)
    np.testing.assert_allclose(G[1:, 0, 1:], 0.1 * np.eye(2), atol=1e-10)


def test_christoffel_near_pole_rejected():
    s = circle_state([const(1.0)], [S2], M=16)
    with pytest.raises(ChartSingularity):
        geometry.christoffel_closed(s, ChartPoint((0.0,), ((0.1, 1.0),)))


def test_nonpositive_warping():
    s = circle_state([lambda t: np.sin(t)], [S2], M=16)
    with pytest.raises(NonPositiveWarping):
        geometry.curvature_blocks(s)


def test_scalar_matches_one_dimensional_formula(rng):
    for _ in range(5):
        data = fd_oracle.random_smooth_data(rng, BaseKind.CIRCLE, (S2, FiberSpec(3, 0.7)))
        s = data.to_state(128)
        b = geometry.curvature_blocks(s)
        np.testing.assert_allclose(b.scalar_R, flow_s1.scalar_curvature_s1(s), atol=1e-12, rtol=0)


def test_scalar_is_weighted_ricci_trace(rng):
    data = fd_oracle.random_smooth_data(rng, BaseKind.TORUS, (S2, S3))
    b = geometry.curvature_blocks(data.to_state(32))
    ns = np.array([2, 3])
    tr = np.einsum("ii...->...", b.ricci_base) + np.einsum("a,a...->...", ns, b.ricci_fiber_coeff)
    np.testing.assert_allclose(b.scalar_R, tr, atol=1e-13)


def test_tensor_norm_second_order_decay():
    # |∇²v|² of a non-trivial warping: error against a fine grid drops ~4x per halving
    vs = [lambda t: 1 + 0.3 * np.sin(t) + 0.1 * np.cos(2 * t), lambda t: 1.2 + 0.2 * np.cos(t)]
    fine = circle_state(vs, [S2, S3], M=1024)
    ref = geometry.operators(fine.v[0], fine).tensor_norm_sq
    errs = []
    for M in (16, 32, 64):
        s = circle_state(vs, [S2, S3], M=M)
        val = geometry.operators(s.v[0], s).tensor_norm_sq
        errs.append(np.abs(val - ref[:: 1024 // M]).max())
    assert errs[0] / errs[1] > 4 and errs[1] / errs[2] > 4


# 4-D Uhlenbeck quantities

def test_uhlenbeck_flat_cylinder():
    s = torus_state([const(np.log(np.sqrt(2)))], [S2], M=16)
    u = geometry.uhlenbeck(s)
    np.testing.assert_allclose(u.lambda1, 0.0, atol=1e-13)
    np.testing.assert_allclose(u.lambda2, 0.5, atol=1e-13)
    for x in (u.lambda3, u.lambda4, u.lambda5):
        np.testing.assert_allclose(x, 0.0, atol=1e-13)
    np.testing.assert_allclose(u.a2 + u.lambda2, 0.5, atol=1e-13)
    np.testing.assert_allclose(u.b1, -0.5, atol=1e-13)
    np.testing.assert_allclose(u.h, 0.0, atol=1e-13)
    assert np.all(np.isnan(u.G))


def test_uhlenbeck_needs_four_dimensions():
    with pytest.raises(DimensionMismatch):
        geometry.uhlenbeck(torus_state([const(0.0), const(0.0)], [S2, S3], M=16))
    with pytest.raises(DimensionMismatch):
        geometry.uhlenbeck(circle_state([const(1.0)], [S2], M=16))


def test_uhlenbeck_a1_plus_b1(rng):
    data = fd_oracle.random_smooth_data(rng, BaseKind.TORUS, (S2,))
    u = geometry.uhlenbeck(data.to_state(32))
    np.testing.assert_allclose(u.a1 + u.b1, 2 * u.lambda1, atol=1e-12)


def test_uhlenbeck_block_conjugation(rng):
    data = fd_oracle.random_smooth_data(rng, BaseKind.TORUS, (S2,))
    u = geometry.uhlenbeck(data.to_state(32), frame="chart")
    A = geometry.UHLENBECK_A
    for idx in [(0, 0), (3, 17), (20, 9)]:
        conj = np.linalg.inv(A) @ u.M_beta(idx) @ A
        np.testing.assert_allclose(u.M_alpha(idx), conj, atol=1e-10)
        Ma = u.M_alpha(idx)
        np.testing.assert_allclose(Ma[:3, :3], Ma[3:, 3:], atol=1e-12)
        np.testing.assert_allclose(Ma[:3, :3], np.diag(np.diag(Ma[:3, :3])), atol=1e-12)


def test_uhlenbeck_eigenframe_invariants(rng):
    data = fd_oracle.random_smooth_data(rng, BaseKind.TORUS, (S2,))
    s = data.to_state(32)
    e, c = geometry.uhlenbeck(s, "eigen"), geometry.uhlenbeck(s, "chart")
    # trace and determinant of the Hessian block agree in both frames
    np.testing.assert_allclose(e.a2, c.a2, atol=1e-12)
    np.testing.assert_allclose(e.lambda3 * e.lambda4, c.lambda3 * c.lambda4 - c.lambda5**2 / 4, atol=1e-12)
    assert np.all(e.lambda3 <= e.lambda4 + 1e-15)


# property tests

amps = st.floats(0.0, 0.4)
means = st.floats(0.6, 2.0)


@settings(max_examples=30, deadline=None)
@given(m1=means, m2=means, a1=amps, a2=amps, k=st.integers(1, 3))
def test_blocks_invariants(m1, m2, a1, a2, k):
    s = circle_state([lambda t: m1 + a1 * m1 * np.sin(k * t), lambda t: m2 + a2 * m2 * np.cos(t)],
                     [S2, FiberSpec(3, 1.5)], M=64)
    b = geometry.curvature_blocks(s)
    assert np.array_equal(b.kappa_fiber_cross[0, 1], b.kappa_fiber_cross[1, 0])
    assert np.all(b.riemann_norm_sq >= 0)
    total, fl = geometry.riemann_norm_sq(b, flat=(1,))
    assert np.all(fl <= total + 1e-12) and np.all(fl >= 0)
    # on a circle base every term touches a fiber
    full, fl_all = geometry.riemann_norm_sq(b, flat=(0, 1))
    np.testing.assert_allclose(fl_all, full, rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(lam=st.floats(0.3, 3.0), n=st.integers(2, 5), v=st.floats(0.5, 2.0))
def test_constant_warping_self_curvature(lam, n, v):
    f = FiberSpec(n, lam * (n - 1))
    b = geometry.curvature_blocks(circle_state([const(v)], [f], M=16))
    np.testing.assert_allclose(b.kappa_fiber_self[0], lam / v**2, rtol=1e-12)
    np.testing.assert_allclose(b.scalar_R, n * (n - 1) * lam / v**2, rtol=1e-12)
