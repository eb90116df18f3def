import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import S2, S3
from warpflow import fd_oracle, geometry
from warpflow.chart import ChartPoint, random_chart_point
from warpflow.errors import ChartSingularity, StepTooSmall
from warpflow.state import BaseKind, FiberSpec


def flat_torus():
    return fd_oracle.SmoothWarpedData(BaseKind.TORUS, (), (), lambda x, y: (1.0, 0.0, 1.0))


def test_flat_torus_riemann_vanishes():
    R = fd_oracle.riemann_fd(flat_torus(), ChartPoint((0.3, 1.1), ()))
    assert np.abs(R.R).max() <= 1e-9


def test_round_fiber_space_form():
    data = fd_oracle.SmoothWarpedData(BaseKind.CIRCLE, (S2,), (lambda t: 1.0 + 0 * t,), lambda t: 1.0 + 0 * t)
    R = fd_oracle.riemann_fd(data, ChartPoint((0.4,), ((1.0, 0.7),))).in_frame()
    assert R[1, 2, 2, 1] == pytest.approx(1.0, abs=1e-6)
    assert R[1, 2, 1, 2] == pytest.approx(-1.0, abs=1e-6)


def test_pole_guard():
    data = fd_oracle.SmoothWarpedData(BaseKind.CIRCLE, (S2,), (lambda t: 1.0 + 0 * t,), lambda t: 1.0 + 0 * t)
    with pytest.raises(ChartSingularity):
        fd_oracle.riemann_fd(data, ChartPoint((0.0,), ((0.05, 1.0),)))
    with pytest.raises(ChartSingularity):
        fd_oracle.christoffel_fd(data, ChartPoint((0.0,), ((np.pi - 0.1, 1.0),)))


def test_step_too_small():
    data = fd_oracle.SmoothWarpedData(BaseKind.CIRCLE, (S2,), (lambda t: 1.0 + 0 * t,), lambda t: 1.0 + 0 * t)
    with pytest.raises(StepTooSmall):
        fd_oracle.riemann_fd(data, ChartPoint((0.0,), ((1.0, 1.0),)), h=1e-5)


def test_fourth_order_decay():
    rng = np.random.default_rng(7)
    data = fd_oracle.random_smooth_data(rng, BaseKind.CIRCLE, (S2,))
    p = random_chart_point(rng, (0.7,), [2])
    ref = fd_oracle.riemann_fd(data, p, h=4e-3).R
    errs = [np.abs(fd_oracle.riemann_fd(data, p, h=h).R - ref).max() for h in (0.08, 0.04)]
    # 4th order: halving h cuts the error by ~16
    assert errs[0] / errs[1] > 12


def test_bianchi_and_symmetries(rng):
    data = fd_oracle.random_smooth_data(rng, BaseKind.TORUS, (S2,))
    R = fd_oracle.riemann_fd(data, random_chart_point(rng, (0.2, 2.0), [2]))
    scale = np.abs(R.R).max()
    assert R.bianchi_defect() <= 1e-6 * scale
    assert R.asymmetry <= 1e-6 * scale
    np.testing.assert_allclose(R.R, -np.einsum("ijkl->jikl", R.R), atol=0)
    np.testing.assert_allclose(R.R, np.einsum("ijkl->klij", R.R), atol=1e-15 * scale)


def _state_and_fd(rng, base=BaseKind.CIRCLE, M=512):
    data = fd_oracle.random_smooth_data(rng, base, (S2, S3))
    s = data.to_state(M)
    k = int(rng.integers(M))
    if base is BaseKind.CIRCLE:
        idx, coords = (k,), (float(s.theta[k]),)
    else:
        idx, coords = (k, 3), (float(s.x[k]), float(s.y[3]))
    p = random_chart_point(rng, coords, [2, 3])
    return s, idx, p, data


def test_compare_blocks_identical_inputs_pass(rng):
    s, idx, _, _ = _state_and_fd(rng, M=64)
    b = geometry.curvature_blocks(s)
    frame = fd_oracle.assemble_frame_riemann(b, idx, 1)
    cmp = fd_oracle.compare_blocks(b, frame, 1e-12, idx)
    assert cmp.pass_
    assert all(e == 0.0 for e in cmp.max_rel_error.values())


def test_compare_blocks_injected_fault(rng):
    s, idx, _, _ = _state_and_fd(rng, M=64)
    b = geometry.curvature_blocks(s)
    frame = fd_oracle.assemble_frame_riemann(b, idx, 1)
    # perturb one fiber-cross component (and its symmetric partners) by 1%
    i, j = 1, 3
    frame = frame.copy()
    delta = 0.01 * frame[i, j, j, i]
    for a, b_, c, d, sgn in [(i, j, j, i, 1), (j, i, i, j, 1), (i, j, i, j, -1), (j, i, j, i, -1)]:
        frame[a, b_, c, d] += sgn * delta
    cmp = fd_oracle.compare_blocks(b, frame, 1e-6, idx)
    assert not cmp.pass_
    assert cmp.failed == ["fiber_cross"]


@pytest.mark.parametrize("base,M", [(BaseKind.CIRCLE, 512), (BaseKind.TORUS, 384)])
def test_closed_blocks_match_oracle(base, M):
    rng = np.random.default_rng(3)
    for _ in range(3):
        s, idx, p, data = _state_and_fd(rng, base, M)
        b = geometry.curvature_blocks(s)
        cmp = fd_oracle.compare_blocks(b, fd_oracle.riemann_fd(data, p), 1e-6, idx)
        assert cmp.pass_, cmp.max_rel_error
        G = geometry.christoffel_closed(s, p)
        Gfd = fd_oracle.christoffel_fd(data, p)
        assert np.abs(G - Gfd).max() <= 1e-6 * np.abs(Gfd).max()


def test_oracle_sweep_small_is_deterministic():
    a = fd_oracle.oracle_sweep(n_states=4, seed=11, M=256)
    b = fd_oracle.oracle_sweep(n_states=4, seed=11, M=256)
    assert a == b
    assert a["pass"]
    assert set(a["max_rel_error"]) >= {"fiber_cross", "base_fiber", "christoffel", "riemann_norm_sq"}


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_frame_riemann_norm_matches_blocks(seed):
    # the assembled frame tensor and the closed |Rm|² describe the same curvature
    rng = np.random.default_rng(seed)
    data = fd_oracle.random_smooth_data(rng, BaseKind.CIRCLE, (S2, FiberSpec(3, 0.5)))
    s = data.to_state(32)
    b = geometry.curvature_blocks(s)
    k = int(rng.integers(32))
    R = fd_oracle.assemble_frame_riemann(b, (k,), 1)
    assert (R**2).sum() == pytest.approx(float(b.riemann_norm_sq[k]), rel=1e-12)
    np.testing.assert_allclose(R, -np.einsum("ijkl->jikl", R), atol=1e-15)
    cyc = R + np.einsum("ijkl->iklj", R) + np.einsum("ijkl->iljk", R)
    assert np.abs(cyc).max() <= 1e-12
