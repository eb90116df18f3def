"""Closed-form geometry of a multiply warped product g = ǧ + Σ v_a² ĝ_a.

Fibers are round spheres with sectional curvature λ̂_a = μ_a/(n_a - 1).
Base tensors are reported in an orthonormal frame of ǧ: the arclength frame
on S¹, and the Cholesky frame (e_1 ∝ ∂_x) on the torus. Sectional curvatures
use the convention R(e_A, e_B, e_B, e_A) = K(e_A, e_B).
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import stencils
from .chart import ChartPoint
from .errors import DegenerateMetric, DimensionMismatch, NonPositiveWarping
from .state import FlowStateS1, FlowStateSurface

# ---------------------------------------------------------------------------
# base metric helpers
# ---------------------------------------------------------------------------


class CircleGeometry:
    """Arclength derivatives on a θ-grid with metric density φ."""

    def __init__(self, phi, h):
        self.phi = np.asarray(phi, dtype=float)
        self.h = h
        self.phi_theta = stencils.d1(self.phi, h)

    def ds(self, f):
        return stencils.d1(f, self.h) / self.phi

    def dss(self, f):
        f_t = stencils.d1(f, self.h)
        f_tt = stencils.d2(f, self.h)
        return (f_tt - self.phi_theta / self.phi * f_t) / self.phi**2

    def dsss(self, f):
        return self.ds(self.dss(f))

    def grad(self, f):
        return self.ds(f)[None]

    def hess(self, f):
        return self.dss(f)[None, None]

    def lap(self, f):
        return self.dss(f)

    def integrate(self, f):
        return float(np.sum(f * self.phi) * self.h)


class SurfaceGeometry:
    """Christoffels, frame, curvature and operators of a periodic 2-D metric."""

    def __init__(self, g, h):
        g11, g12, g22 = (np.asarray(c, dtype=float) for c in g)
        det = g11 * g22 - g12**2
        if np.any(det <= 0) or np.any(g11 <= 0):
            raise DegenerateMetric("base metric is not positive definite")
        self.h = h
        self.det = det
        self.g = np.array([[g11, g12], [g12, g22]])
        self.ginv = np.array([[g22, -g12], [-g12, g11]]) / det
        comps = {(0, 0): g11, (0, 1): g12, (1, 1): g22}
        d = {}
        dd = {}
        for ij, c in comps.items():
            cx = stencils.d1(c, h[0], axis=0)
            cy = stencils.d1(c, h[1], axis=1)
            d[ij] = (cx, cy)
            dd[ij] = (
                (stencils.d2(c, h[0], axis=0), stencils.d1(cx, h[1], axis=1)),
                (stencils.d1(cx, h[1], axis=1), stencils.d2(c, h[1], axis=1)),
            )
        shape = g11.shape
        self.dg = np.empty((2, 2, 2) + shape)  # dg[k, i, j] = ∂_k g_ij
        self.ddg = np.empty((2, 2, 2, 2) + shape)  # ddg[k, l, i, j] = ∂_k ∂_l g_ij
        for (i, j), (cx, cy) in d.items():
            for k, val in enumerate((cx, cy)):
                self.dg[k, i, j] = self.dg[k, j, i] = val
            for k in range(2):
                for l in range(2):
                    self.ddg[k, l, i, j] = self.ddg[k, l, j, i] = dd[(i, j)][k][l]

    @cached_property
    def christoffel(self):
        """Γ[k, i, j] = Γ^k_ij."""
        dg = self.dg
        low = 0.5 * (
            np.einsum("ilj...->lij...", dg)  # ∂_i g_lj
            + np.einsum("jli...->lij...", dg)  # ∂_j g_li
            - dg  # ∂_l g_ij
        )
        return np.einsum("kl...,lij...->kij...", self.ginv, low)

    @cached_property
    def frame(self):
        """E with columns e_1, e_2 orthonormal for ǧ (Cholesky, e_1 along ∂_x)."""
        g11, g12, g22 = self.g[0, 0], self.g[0, 1], self.g[1, 1]
        l11 = np.sqrt(g11)
        l21 = g12 / l11
        l22 = np.sqrt(g22 - l21**2)
        zero = np.zeros_like(l11)
        return np.array([[1 / l11, -l21 / (l11 * l22)], [zero, 1 / l22]])

    @cached_property
    def scalar_curvature(self):
        """Ř = 2K from the divergence form K√g = ∂_y(√g Γ²₁₁/g₁₁) - ∂_x(√g Γ²₁₂/g₁₁).

        The periodic centered stencils sum to zero, so ∬ Ř dǍ vanishes to roundoff.
        """
        G = self.christoffel
        W = np.sqrt(self.det)
        g11 = self.g[0, 0]
        flux_y = W * G[1, 0, 0] / g11
        flux_x = W * G[1, 0, 1] / g11
        K = (stencils.d1(flux_y, self.h[1], axis=1) - stencils.d1(flux_x, self.h[0], axis=0)) / W
        return 2.0 * K

    @cached_property
    def scalar_curvature_pointwise(self):
        """Ř = 2K with K = R_1221 / det ǧ from second derivatives of ǧ."""
        G = self.christoffel
        ginv, dg, ddg = self.ginv, self.dg, self.ddg
        # dGamma[m, l, j, k] = ∂_m Γ^l_jk
        dginv = -np.einsum("la...,mab...,bc...->mlc...", ginv, dg, ginv)
        low = 0.5 * (
            np.einsum("mjck...->mcjk...", ddg)
            + np.einsum("mkcj...->mcjk...", ddg)
            - np.einsum("mcjk...->mcjk...", ddg)
        )
        low_first = 0.5 * (
            np.einsum("jck...->cjk...", dg)
            + np.einsum("kcj...->cjk...", dg)
            - dg
        )
        dG = np.einsum("mlc...,cjk...->mljk...", dginv, low_first) + np.einsum(
            "lc...,mcjk...->mljk...", ginv, low
        )
        # R^l_{122} = ∂_1 Γ^l_22 - ∂_2 Γ^l_12 + Γ^l_1m Γ^m_22 - Γ^l_2m Γ^m_12
        R_l = (
            dG[0, :, 1, 1]
            - dG[1, :, 0, 1]
            + np.einsum("lm...,m...->l...", G[:, 0, :], G[:, 1, 1])
            - np.einsum("lm...,m...->l...", G[:, 1, :], G[:, 0, 1])
        )
        R1221 = np.einsum("l...,l...->...", self.g[0], R_l)
        return 2.0 * R1221 / self.det

    def partials(self, f):
        return np.array(
            [stencils.d1(f, self.h[0], axis=0), stencils.d1(f, self.h[1], axis=1)]
        )

    def coord_hess(self, f):
        fx = stencils.d1(f, self.h[0], axis=0)
        fxx = stencils.d2(f, self.h[0], axis=0)
        fyy = stencils.d2(f, self.h[1], axis=1)
        fxy = stencils.d1(fx, self.h[1], axis=1)
        df = np.array([fx, stencils.d1(f, self.h[1], axis=1)])
        dd = np.array([[fxx, fxy], [fxy, fyy]])
        return dd - np.einsum("kij...,k...->ij...", self.christoffel, df)

    def lap(self, f):
        return np.einsum("ij...,ij...->...", self.ginv, self.coord_hess(f))

    def to_frame_vec(self, df):
        return np.einsum("k...,ki...->i...", df, self.frame)

    def to_frame_tensor(self, T):
        E = self.frame
        return np.einsum("ki...,kl...,lj...->ij...", E, T, E)

    def grad(self, f):
        return self.to_frame_vec(self.partials(f))

    def hess(self, f):
        return self.to_frame_tensor(self.coord_hess(f))

    def area_density(self):
        return np.sqrt(self.det)

    def integrate(self, f):
        return float(np.sum(f * np.sqrt(self.det)) * self.h[0] * self.h[1])


def base_geometry(state):
    if isinstance(state, FlowStateS1):
        return CircleGeometry(state.phi, state.h)
    if isinstance(state, FlowStateSurface):
        return SurfaceGeometry(state.g, state.h)
    raise TypeError(f"unsupported state type {type(state).__name__}")


# ---------------------------------------------------------------------------
# jets and curvature blocks
# ---------------------------------------------------------------------------


@dataclass
class BaseJet:
    """Pointwise data of the warpings needed by the curvature formulas.

    ``grad[a, i]`` and ``hess[a, i, j]`` are orthonormal-frame components.
    """

    v: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    Rcheck: np.ndarray
    fibers: tuple

    @property
    def dim(self):
        return self.grad.shape[1]


def jet(state, geom=None) -> BaseJet:
    v = state.v
    if np.any(~(v > 0)):
        raise NonPositiveWarping("warping function is not strictly positive")
    geom = geom or base_geometry(state)
    grad = np.array([geom.grad(va) for va in v])
    hess = np.array([geom.hess(va) for va in v])
    if isinstance(state, FlowStateS1):
        Rcheck = np.zeros_like(state.phi)
    else:
        Rcheck = geom.scalar_curvature
    return BaseJet(v, grad, hess, Rcheck, tuple(state.fibers))


@dataclass
class CurvatureBlocks:
    """The four sectional-curvature flavors plus Ricci, scalar and |Rm|².

    ``kappa_fiber_cross[a, b]`` has a zero diagonal; ``base_fiber_block[a]`` is
    the frame matrix of -∇̌²v_a / v_a.
    """

    kappa_base: np.ndarray
    kappa_fiber_self: np.ndarray
    kappa_fiber_cross: np.ndarray
    base_fiber_block: np.ndarray
    ricci_base: np.ndarray
    ricci_fiber_coeff: np.ndarray
    scalar_R: np.ndarray
    riemann_norm_sq: np.ndarray
    fibers: tuple


def blocks_from_jet(j: BaseJet) -> CurvatureBlocks:
    v, grad, hess = j.v, j.grad, j.hess
    A = v.shape[0]
    dim = j.dim
    lam = np.array([f.lambda_hat for f in j.fibers])
    ns = np.array([f.n for f in j.fibers], dtype=float)
    ex = (slice(None),) + (None,) * (v.ndim - 1)

    grad_sq = np.einsum("ai...,ai...->a...", grad, grad)
    kself = (lam[ex] - grad_sq) / v**2
    inner = np.einsum("ai...,bi...->ab...", grad, grad)
    kcross = -inner / (v[:, None] * v[None, :])
    for a in range(A):
        kcross[a, a] = 0.0
    H = -hess / v[:, None, None]

    kbase = 0.5 * j.Rcheck if dim == 2 else np.zeros_like(j.Rcheck)
    eye = np.eye(dim).reshape((dim, dim) + (1,) * (v.ndim - 1))
    ric_base = kbase * (dim - 1) * eye + np.einsum("a,aij...->ij...", ns, H)
    trH = np.einsum("aii...->a...", H)
    ric_fib = trH + (ns[ex] - 1) * kself + np.einsum("b,ab...->a...", ns, kcross)
    scalar = np.einsum("ii...->...", ric_base) + np.einsum("a,a...->...", ns, ric_fib)

    blocks = CurvatureBlocks(
        kappa_base=kbase,
        kappa_fiber_self=kself,
        kappa_fiber_cross=kcross,
        base_fiber_block=H,
        ricci_base=ric_base,
        ricci_fiber_coeff=ric_fib,
        scalar_R=scalar,
        riemann_norm_sq=np.zeros_like(scalar),
        fibers=j.fibers,
    )
    blocks.riemann_norm_sq = riemann_norm_sq(blocks)[0]
    return blocks


def curvature_blocks(state) -> CurvatureBlocks:
    """Curvature blocks of a flow state at every grid point."""
    return blocks_from_jet(jet(state))


def riemann_norm_sq(blocks: CurvatureBlocks, flat=()):
    """Return (|Rm|², Σ_fl) where Σ_fl collects terms touching a fiber in ``flat``.

    Multiplicities count every ordered index quadruple of an orthonormal frame:
    4 per unordered sectional plane, so a fiber pair (a, b) contributes
    4 n_a n_b κ_ab² once, i.e. 2 n_a n_b κ_ab² per ordered pair.
    """
    ns = np.array([f.n for f in blocks.fibers], dtype=float)
    A = ns.size
    flat = set(flat)
    is_flat = np.array([a in flat for a in range(A)])

    base = 4.0 * blocks.kappa_base**2
    bf = np.array(
        [4.0 * ns[a] * np.einsum("ij...,ij...->...", blocks.base_fiber_block[a], blocks.base_fiber_block[a]) for a in range(A)]
    )
    selfs = np.array([2.0 * ns[a] * (ns[a] - 1) * blocks.kappa_fiber_self[a] ** 2 for a in range(A)])
    total = base + bf.sum(axis=0) + selfs.sum(axis=0)
    sigma_fl = np.zeros_like(total) + bf[is_flat].sum(axis=0) + selfs[is_flat].sum(axis=0)
    for a in range(A):
        for b in range(A):
            if a == b:
                continue
            term = 2.0 * ns[a] * ns[b] * blocks.kappa_fiber_cross[a, b] ** 2
            total = total + term
            if is_flat[a] or is_flat[b]:
                sigma_fl = sigma_fl + term
    return total, sigma_fl


# ---------------------------------------------------------------------------
# operators on base functions
# ---------------------------------------------------------------------------


@dataclass
class FullOperators:
    """Hessian, Laplacian and Hessian norm of a base function on the full manifold.

    The full Hessian is ∇̌²φ on the base block and ``fiber_coeff[a]`` times g_a
    on fiber a.
    """

    base_hessian: np.ndarray
    fiber_coeff: np.ndarray
    laplacian: np.ndarray
    tensor_norm_sq: np.ndarray


def operators(phi, state, geom=None) -> FullOperators:
    geom = geom or base_geometry(state)
    v = state.v
    ns = np.array([f.n for f in state.fibers], dtype=float)
    gphi = geom.grad(phi)
    hphi = geom.hess(phi)
    gv = np.array([geom.grad(va) for va in v])
    coeff = np.einsum("ai...,i...->a...", gv, gphi) / v
    lap = np.einsum("ii...->...", hphi) + np.einsum("a,a...->...", ns, coeff)
    norm = np.einsum("ij...,ij...->...", hphi, hphi) + np.einsum("a,a...->...", ns, coeff**2)
    return FullOperators(hphi, coeff, lap, norm)


def full_laplacian(f, state, geom=None):
    return operators(f, state, geom).laplacian


# ---------------------------------------------------------------------------
# connection coefficients on the product chart
# ---------------------------------------------------------------------------


def _sphere_christoffel(angles, lambda_hat):
    """Γ̂ of the round metric in hyperspherical angles (diagonal metric)."""
    n = len(angles)
    r2 = 1.0 / lambda_hat
    diag = np.empty(n)
    prod = r2
    for k in range(n):
        diag[k] = prod
        prod *= np.sin(angles[k]) ** 2
    # ∂_j ĝ_kk = 2 cot(ψ_j) ĝ_kk for j < k
    dg = np.zeros((n, n))  # dg[j, k] = ∂_j ĝ_kk
    for k in range(n):
        for jj in range(k):
            dg[jj, k] = 2.0 / np.tan(angles[jj]) * diag[k]
    G = np.zeros((n, n, n))
    for k in range(n):
        for i in range(n):
            G[k, k, i] += dg[i, k] / (2 * diag[k])
            if i != k:
                G[k, i, k] += dg[i, k] / (2 * diag[k])
                G[i, k, k] -= dg[i, k] / (2 * diag[i])
    return G, diag


def _grid_index(coords, grids, tol=1e-9):
    idx = []
    for c, grid in zip(coords, grids):
        h = grid[1] - grid[0]
        k = int(round((c % (2 * np.pi)) / h)) % grid.size
        if abs(((c - grid[k] + np.pi) % (2 * np.pi)) - np.pi) > tol:
            raise ValueError(f"base coordinate {c} is not a grid node")
        idx.append(k)
    return tuple(idx)


def christoffel_closed(state, point: ChartPoint, geom=None):
    """Γ^K_IJ of the full metric at a chart point whose base coordinate is a grid node.

    Coordinates are ordered (base, fiber 1 angles, fiber 2 angles, ...).
    """
    point.check()
    geom = geom or base_geometry(state)
    fibers = state.fibers
    v = state.v
    if isinstance(state, FlowStateS1):
        (k,) = _grid_index(point.base_coords, [state.theta])
        idx = (k,)
        dim = 1
        gb = np.array([[state.phi[k] ** 2]])
        Gb = np.array([[[geom.phi_theta[k] / state.phi[k]]]])
        dv = np.array([[stencils.d1(va, state.h)[k]] for va in v])
    else:
        idx = _grid_index(point.base_coords, [state.x, state.y])
        dim = 2
        gb = geom.g[(slice(None), slice(None)) + idx]
        Gb = geom.christoffel[(slice(None),) * 3 + idx]
        dv = np.array([geom.partials(va)[(slice(None),) + idx] for va in v])
    gbinv = np.linalg.inv(gb)
    N = dim + sum(f.n for f in fibers)
    G = np.zeros((N, N, N))
    G[:dim, :dim, :dim] = Gb
    off = dim
    for a, f in enumerate(fibers):
        va = v[(a,) + idx]
        sl = slice(off, off + f.n)
        Gh, diag = _sphere_christoffel(point.fiber_coords[a], f.lambda_hat)
        G[sl, sl, sl] = Gh
        ga = va**2 * diag
        up = gbinv @ dv[a]  # ∂^k v_a
        for al in range(f.n):
            G[:dim, off + al, off + al] = -up / va * ga[al]
            for i in range(dim):
                G[off + al, i, off + al] = dv[a][i] / va
                G[off + al, off + al, i] = dv[a][i] / va
        off += f.n
    return G


# ---------------------------------------------------------------------------
# Uhlenbeck-frame quantities (2-D base, one S² fiber)
# ---------------------------------------------------------------------------

R_ZERO_TOL = 1e-12

UHLENBECK_A = np.array(
    [
        [1, 0, 0, 1, 0, 0],
        [0, 1, 0, 0, 1, 0],
        [0, 0, 1, 0, 0, 1],
        [0, 0, 1, 0, 0, -1],
        [0, -1, 0, 0, 1, 0],
        [1, 0, 0, -1, 0, 0],
    ],
    dtype=float,
) / np.sqrt(2)


@dataclass
class UhlenbeckQuantities:
    lambda1: np.ndarray
    lambda2: np.ndarray
    lambda3: np.ndarray
    lambda4: np.ndarray
    lambda5: np.ndarray

    @property
    def a1(self):
        return self.lambda1 + self.lambda2

    @property
    def a2(self):
        return self.lambda3 + self.lambda4

    @property
    def b1(self):
        return self.lambda1 - self.lambda2

    @property
    def b2(self):
        return self.lambda3 - self.lambda4

    @property
    def h(self):
        return self.b2**2 + self.lambda5**2

    @property
    def G(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            # Ř below round-off level counts as zero
            return np.where(self.lambda1 > R_ZERO_TOL, np.sqrt(self.h) / self.lambda1, np.nan)

    @property
    def p_sign(self):
        R = self.lambda1
        with np.errstate(divide="ignore", invalid="ignore"):
            return 2 * self.b1 + 2 * self.a2 - 2 * R - self.a2**2 / R

    def M_beta(self, index=()):
        l1, l2, l3, l4, l5 = (np.asarray(x)[index] for x in
                              (self.lambda1, self.lambda2, self.lambda3, self.lambda4, self.lambda5))
        M = np.zeros((6, 6))
        M[0, 0] = 2 * l1
        M[1, 1] = M[2, 2] = 2 * l3
        M[3, 3] = M[4, 4] = 2 * l4
        M[5, 5] = 2 * l2
        M[1, 3] = M[3, 1] = l5
        M[2, 4] = M[4, 2] = l5
        return M

    def M_alpha(self, index=()):
        """Block matrix [[A, B], [Bᵀ, C]] assembled from a1, a2, b1, b2, λ5."""
        a1, a2, b1, b2, l5 = (np.asarray(x)[index] for x in
                              (self.a1, self.a2, self.b1, self.b2, self.lambda5))
        Ab = np.diag([a1, a2, a2])
        B = np.array([[b1, 0, 0], [0, b2, -l5], [0, l5, b2]])
        return np.block([[Ab, B], [B.T, Ab]])


def uhlenbeck(state, frame: str = "eigen", geom=None) -> UhlenbeckQuantities:
    """λ₁..λ₅ for a 2-D base with a single S² fiber.

    ``frame="eigen"`` aligns (e₁, e₂) with the eigenvectors of ∇̌²v (larger
    eigenvalue first), so λ₅ = 0; ``frame="chart"`` uses the Cholesky frame.
    """
    if not isinstance(state, FlowStateSurface) or len(state.fibers) != 1 or state.fibers[0].n != 2:
        raise DimensionMismatch("Uhlenbeck quantities need a 2-D base and a single S² fiber")
    geom = geom or base_geometry(state)
    j = jet(state, geom)
    v = j.v[0]
    lam = state.fibers[0].lambda_hat
    l1 = j.Rcheck
    l2 = (lam - np.einsum("i...,i...->...", j.grad[0], j.grad[0])) / v**2
    H = j.hess[0]
    if frame == "chart":
        l3, l4, l5 = -H[0, 0] / v, -H[1, 1] / v, -2 * H[0, 1] / v
    elif frame == "eigen":
        tr = H[0, 0] + H[1, 1]
        disc = np.sqrt(0.25 * (H[0, 0] - H[1, 1]) ** 2 + H[0, 1] ** 2)
        e_hi = 0.5 * tr + disc
        e_lo = 0.5 * tr - disc
        l3, l4, l5 = -e_hi / v, -e_lo / v, np.zeros_like(v)
    else:
        raise ValueError(f"unknown frame {frame!r}")
    return UhlenbeckQuantities(l1, l2, l3, l4, l5)
