"""Brute-force curvature of the full metric on an explicit product chart.

Nothing here uses the warped-product formulas: the metric is evaluated as a
dense N x N matrix from analytic base and warping functions, differentiated
with fourth-order finite differences, and pushed through the textbook
Christoffel/Riemann formulas. It is deliberately slow and simple.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .chart import ChartPoint, sphere_metric_diag
from .errors import StepTooSmall
from .state import BaseKind, FiberSpec, FlowStateS1, FlowStateSurface, WarpedProductSpec

_W1 = ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12))
_W2 = ((-2, -1 / 12), (-1, 16 / 12), (0, -30 / 12), (1, 16 / 12), (2, -1 / 12))


@dataclass
class SmoothWarpedData:
    """Analytic warped-product data: evaluable anywhere, sampled onto grids on demand.

    On the circle ``base_metric(theta)`` returns the density phi; on the torus
    ``base_metric(x, y)`` returns (g11, g12, g22).
    """

    base: BaseKind
    fibers: tuple
    warpings: tuple
    base_metric: Callable

    def spec(self) -> WarpedProductSpec:
        return WarpedProductSpec(self.base, self.fibers, self.warpings, self.base_metric)

    def to_state(self, M):
        from .state import state_from_spec

        return state_from_spec(self.spec(), M)

    def metric(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        dim = self.base.dim
        N = dim + sum(f.n for f in self.fibers)
        g = np.zeros((N, N))
        base = tuple(x[:dim])
        if self.base is BaseKind.CIRCLE:
            g[0, 0] = float(self.base_metric(base[0])) ** 2
        else:
            g11, g12, g22 = (float(c) for c in self.base_metric(*base))
            g[:2, :2] = [[g11, g12], [g12, g22]]
        off = dim
        for f, va in zip(self.fibers, self.warpings):
            val = float(va(*base))
            diag = sphere_metric_diag(x[off:off + f.n], f.lambda_hat)
            g[np.arange(off, off + f.n), np.arange(off, off + f.n)] = val**2 * diag
            off += f.n
        return g


def _trig(rng, mean, amp, kmax, ndim):
    """Random trigonometric polynomial of degree ≤ kmax with sup-deviation ≤ amp."""
    terms = []
    for _ in range(2 * kmax):
        k = rng.integers(-kmax, kmax + 1, size=ndim)
        if not np.any(k):
            k[0] = 1
        terms.append((k, rng.uniform(0, 2 * np.pi), rng.uniform(-1, 1)))
    scale = amp / sum(abs(c) for _, _, c in terms)

    def f(*coords):
        out = mean
        for k, ph, c in terms:
            arg = sum(ki * xi for ki, xi in zip(k, coords)) + ph
            out = out + scale * c * np.cos(arg)
        return out

    return f


def random_smooth_data(rng, base=BaseKind.CIRCLE, fibers=None, kmax=2) -> SmoothWarpedData:
    """Random positive warpings and base metric built from low trigonometric modes."""
    if fibers is None:
        fibers = (FiberSpec.unit_sphere(2), FiberSpec.unit_sphere(3))
    fibers = tuple(fibers)
    ndim = base.dim
    warpings = tuple(
        _trig(rng, rng.uniform(0.8, 1.5), rng.uniform(0.05, 0.3), kmax, ndim) for _ in fibers
    )
    if base is BaseKind.CIRCLE:
        base_metric = _trig(rng, 1.0, rng.uniform(0.0, 0.3), kmax, 1)
    else:
        a = _trig(rng, 0.0, rng.uniform(0.0, 0.2), kmax, 2)
        b = _trig(rng, 0.0, rng.uniform(0.0, 0.2), kmax, 2)
        c = _trig(rng, 0.0, rng.uniform(0.0, 0.15), kmax, 2)

        def base_metric(x, y):
            # exp of a symmetric matrix with small entries stays positive definite
            return 1.0 + a(x, y), c(x, y), 1.0 + b(x, y)

    return SmoothWarpedData(base, fibers, warpings, base_metric)


def _derivatives(data: SmoothWarpedData, x0, h):
    """First and second partials of the metric by fourth-order differences."""
    x0 = np.asarray(x0, dtype=float)
    N = x0.size
    g0 = data.metric(x0)
    if np.finfo(float).eps * np.abs(g0).max() / h**2 > 1e-8:
        raise StepTooSmall(f"step h={h:g} loses more than 1e-8 to cancellation")
    E = np.eye(N) * h
    dg = np.zeros((N, N, N))
    ddg = np.zeros((N, N, N, N))
    cache = {}

    def at(offsets):
        key = tuple(offsets)
        if key not in cache:
            cache[key] = data.metric(x0 + np.asarray(offsets, float) @ E)
        return cache[key]

    unit = np.eye(N, dtype=int)
    for i in range(N):
        dg[i] = sum(w * at(o * unit[i]) for o, w in _W1) / h
        ddg[i, i] = sum(w * at(o * unit[i]) for o, w in _W2) / h**2
        for j in range(i):
            val = sum(
                wi * wj * at(oi * unit[i] + oj * unit[j]) for oi, wi in _W1 for oj, wj in _W1
            ) / h**2
            ddg[i, j] = ddg[j, i] = val
    return g0, dg, ddg


def christoffel_fd(data: SmoothWarpedData, point: ChartPoint, h: float = 4e-3) -> np.ndarray:
    """Γ[k, i, j] = Γ^k_ij from finite differences of the metric."""
    point.check()
    g, dg, _ = _derivatives(data, point.flat(), h)
    ginv = np.linalg.inv(g)
    low = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
    return np.einsum("kl,lij->kij", ginv, low)


@dataclass
class FDRiemann:
    """Fully covariant R_IJKL = <R(∂_I, ∂_J)∂_K, ∂_L> in chart coordinates."""

    R: np.ndarray
    g: np.ndarray
    asymmetry: float
    dim_base: int
    fiber_dims: tuple = field(default_factory=tuple)

    def frame(self) -> np.ndarray:
        """Orthonormal frame E (columns): Cholesky on the base, scaled axes on fibers."""
        N = self.g.shape[0]
        E = np.zeros((N, N))
        d = self.dim_base
        L = np.linalg.cholesky(self.g[:d, :d])
        E[:d, :d] = np.linalg.inv(L).T
        idx = np.arange(d, N)
        E[idx, idx] = 1.0 / np.sqrt(np.diag(self.g)[d:])
        return E

    def in_frame(self) -> np.ndarray:
        E = self.frame()
        return np.einsum("ijkl,ia,jb,kc,ld->abcd", self.R, E, E, E, E)

    def bianchi_defect(self) -> float:
        R = self.R
        s = R + np.einsum("ijkl->iklj", R) + np.einsum("ijkl->iljk", R)
        return float(np.abs(s).max())


def riemann_fd(data: SmoothWarpedData, point: ChartPoint, h: float = 4e-3,
               symmetrize: bool = True) -> FDRiemann:
    point.check()
    g, dg, ddg = _derivatives(data, point.flat(), h)
    ginv = np.linalg.inv(g)
    low = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
    Gam = np.einsum("kl,lij->kij", ginv, low)
    dginv = -np.einsum("la,mab,bc->mlc", ginv, dg, ginv)
    dlow = 0.5 * (np.einsum("mjck->mcjk", ddg) + np.einsum("mkcj->mcjk", ddg) - ddg)
    dGam = np.einsum("mlc,cjk->mljk", dginv, low) + np.einsum("lc,mcjk->mljk", ginv, dlow)
    # R^l_{ijk} = ∂_i Γ^l_jk - ∂_j Γ^l_ik + Γ^l_im Γ^m_jk - Γ^l_jm Γ^m_ik
    Rup = (
        np.einsum("iljk->lijk", dGam)
        - np.einsum("jlik->lijk", dGam)
        + np.einsum("lim,mjk->lijk", Gam, Gam)
        - np.einsum("ljm,mik->lijk", Gam, Gam)
    )
    R = np.einsum("lm,mijk->ijkl", g, Rup)
    Rs = R
    if symmetrize:
        Rs = 0.5 * (R - np.einsum("ijkl->jikl", R))
        Rs = 0.5 * (Rs - np.einsum("ijkl->ijlk", Rs))
        Rs = 0.5 * (Rs + np.einsum("ijkl->klij", Rs))
    asym = float(np.abs(R - Rs).max())
    return FDRiemann(Rs, g, asym, data.base.dim, tuple(f.n for f in data.fibers))


# ---------------------------------------------------------------------------
# comparison against the closed-form blocks
# ---------------------------------------------------------------------------

FLAVORS = ("base_base", "fiber_self", "fiber_cross", "base_fiber", "other")


def _kn(X, Y):
    """Kulkarni–Nomizu product with (X⊙Y)_IJKL = X_IL Y_JK + X_JK Y_IL - X_IK Y_JL - X_JL Y_IK."""
    return (
        np.einsum("il,jk->ijkl", X, Y)
        + np.einsum("jk,il->ijkl", X, Y)
        - np.einsum("ik,jl->ijkl", X, Y)
        - np.einsum("jl,ik->ijkl", X, Y)
    )


def _projectors(dim_base, fiber_dims):
    N = dim_base + sum(fiber_dims)
    P = []
    Pb = np.zeros((N, N))
    Pb[np.arange(dim_base), np.arange(dim_base)] = 1
    off = dim_base
    for n in fiber_dims:
        Pa = np.zeros((N, N))
        Pa[np.arange(off, off + n), np.arange(off, off + n)] = 1
        P.append(Pa)
        off += n
    return Pb, P


def assemble_frame_riemann(blocks, index, dim_base) -> np.ndarray:
    """Orthonormal-frame Riemann tensor rebuilt from the closed-form blocks at one grid point."""
    fiber_dims = tuple(f.n for f in blocks.fibers)
    Pb, P = _projectors(dim_base, fiber_dims)
    N = Pb.shape[0]
    at = lambda arr: np.asarray(arr)[(Ellipsis,) + tuple(np.atleast_1d(index))]  # noqa: E731
    R = np.zeros((N, N, N, N))
    if dim_base == 2:
        R += 0.5 * float(at(blocks.kappa_base)) * _kn(Pb, Pb)
    A = len(fiber_dims)
    for a in range(A):
        R += 0.5 * float(at(blocks.kappa_fiber_self[a])) * _kn(P[a], P[a])
        H = np.zeros((N, N))
        H[:dim_base, :dim_base] = at(blocks.base_fiber_block[a])
        R += _kn(H, P[a])
        for b in range(a + 1, A):
            R += float(at(blocks.kappa_fiber_cross[a, b])) * _kn(P[a], P[b])
    return R


def _flavor_masks(dim_base, fiber_dims):
    N = dim_base + sum(fiber_dims)
    label = np.zeros(N, dtype=int)  # 0 base, a+1 fiber a
    off = dim_base
    for a, n in enumerate(fiber_dims):
        label[off:off + n] = a + 1
        off += n
    L = np.stack(np.meshgrid(label, label, label, label, indexing="ij"))
    kinds = {f: np.zeros((N,) * 4, dtype=bool) for f in FLAVORS}
    for idx in np.ndindex(*(N,) * 4):
        labs = L[(slice(None),) + idx]
        uniq = sorted(set(labs.tolist()))
        counts = [int(np.sum(labs == u)) for u in uniq]
        if uniq == [0]:
            kinds["base_base"][idx] = True
        elif len(uniq) == 1:
            kinds["fiber_self"][idx] = True
        elif len(uniq) == 2 and counts == [2, 2]:
            kinds["base_fiber" if uniq[0] == 0 else "fiber_cross"][idx] = True
        else:
            kinds["other"][idx] = True
    return kinds


@dataclass
class BlockComparison:
    max_rel_error: dict
    tolerance: float

    @property
    def pass_(self) -> bool:
        return all(e <= self.tolerance for e in self.max_rel_error.values())

    @property
    def failed(self):
        return [k for k, e in self.max_rel_error.items() if e > self.tolerance]

    def as_dict(self):
        return {"max_rel_error": dict(self.max_rel_error), "tolerance": self.tolerance,
                "pass": self.pass_}


def compare_frame_tensors(closed: np.ndarray, fd: np.ndarray, dim_base, fiber_dims,
                          tol: float) -> BlockComparison:
    """Per-flavor max |closed - fd| over max(|flavor|, 1e-2 |Rm|_max)."""
    masks = _flavor_masks(dim_base, fiber_dims)
    gmax = max(np.abs(fd).max(), np.abs(closed).max(), 1e-300)
    errs = {}
    for name, m in masks.items():
        if not m.any():
            continue
        scale = max(np.abs(fd[m]).max(), np.abs(closed[m]).max(), 1e-2 * gmax)
        errs[name] = float(np.abs(closed[m] - fd[m]).max() / scale)
    return BlockComparison(errs, tol)


def compare_blocks(closed, fd, tol: float = 1e-6, index=0) -> BlockComparison:
    """Compare closed-form blocks at grid ``index`` with an FD Riemann tensor.

    ``fd`` is an FDRiemann or an orthonormal-frame N^4 array.
    """
    dim_base = np.asarray(closed.base_fiber_block).shape[1]
    fiber_dims = tuple(f.n for f in closed.fibers)
    R_closed = assemble_frame_riemann(closed, index, dim_base)
    R_fd = fd.in_frame() if isinstance(fd, FDRiemann) else np.asarray(fd)
    return compare_frame_tensors(R_closed, R_fd, dim_base, fiber_dims, tol)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def oracle_sweep(n_states: int = 100, seed: int = 1, M: int = 512, h: float = 4e-3,
                 tol: float = 1e-6, base=BaseKind.CIRCLE, fibers=None):
    """Random states × one random chart point each; returns a JSON-ready report."""
    from . import geometry
    from .chart import random_chart_point

    rng = np.random.default_rng(seed)
    if fibers is None:
        fibers = (FiberSpec.unit_sphere(2), FiberSpec.unit_sphere(3))
    worst = {f: 0.0 for f in FLAVORS}
    worst["christoffel"] = 0.0
    worst["riemann_norm_sq"] = 0.0
    worst_asym = 0.0
    passed = True
    for _ in range(n_states):
        data = random_smooth_data(rng, base, fibers)
        state = data.to_state(M)
        geom = geometry.base_geometry(state)
        blocks = geometry.blocks_from_jet(geometry.jet(state, geom))
        if base is BaseKind.CIRCLE:
            k = int(rng.integers(M))
            index = (k,)
            base_coords = (float(state.theta[k]),)
        else:
            k = (int(rng.integers(M)), int(rng.integers(M)))
            index = k
            base_coords = (float(state.x[k[0]]), float(state.y[k[1]]))
        point = random_chart_point(rng, base_coords, [f.n for f in fibers])
        fd = riemann_fd(data, point, h)
        cmp = compare_blocks(blocks, fd, tol, index)
        G_closed = geometry.christoffel_closed(state, point, geom)
        G_fd = christoffel_fd(data, point, h)
        cerr = float(np.abs(G_closed - G_fd).max() / max(np.abs(G_fd).max(), 1e-300))
        rm_fd = float((fd.in_frame() ** 2).sum())
        rm_err = abs(float(np.asarray(blocks.riemann_norm_sq)[index]) - rm_fd) / max(rm_fd, 1e-300)
        worst["riemann_norm_sq"] = max(worst["riemann_norm_sq"], rm_err)
        for name, e in cmp.max_rel_error.items():
            worst[name] = max(worst[name], e)
        worst["christoffel"] = max(worst["christoffel"], cerr)
        worst_asym = max(worst_asym, fd.asymmetry)
        passed = passed and cmp.pass_ and cerr <= tol and rm_err <= tol
    return {
        "n_states": n_states,
        "seed": seed,
        "M": M,
        "h": h,
        "tolerance": tol,
        "max_rel_error": {k: float(v) for k, v in worst.items()},
        "max_asymmetry": worst_asym,
        "pass": bool(passed),
    }
