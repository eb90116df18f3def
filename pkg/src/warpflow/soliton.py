"""Rotationally symmetric gradient shrinkers on R^2 x S^2.

The base is dr^2 + rho(r)^2 dtheta^2 and the S^2 fiber has radius v(r).
With F = f' the soliton system reduces to

    v''  = (1 - v'^2)/v - v/2 - k v' + F v'        (fiber equation)
    R_b  = 1 + 4 k v'/v - 2 k F                     (theta-theta component)
    k'   = -R_b/2 - k^2                             (k = rho'/rho, R_b = -2 rho''/rho)
    F'   = 2 v''/v - (R_b - 1)/2                    (r-r component)

The cylinder v = sqrt(2), F = r/2, rho = r is an exact solution. Its
linearization has a mode growing like exp(r^2/4), so the system is
integrated in deviation variables about the cylinder:

    u = v - sqrt(2),  p = v',  m = k - 1/r,  G = F - r/2,
    s = log(rho/r),   g = f - r^2/4.

Every forcing term then carries a factor of a deviation, so the
cylinder data stay exactly zero in floating point instead of being
amplified from roundoff.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import AxisExpansionFailure, InvalidConfig

SQRT2 = math.sqrt(2.0)
R0 = 1e-3
R_MAX_LIMIT = 100.0
IDENTITY_TOL = 1e-8
CYLINDER_WINDOW = 1e-6
DR_OUT = 1e-2


class Classification(str, enum.Enum):
    CYLINDER = "Cylinder"
    INCOMPLETE = "Incomplete"
    IDENTITY_VIOLATED = "IdentityViolated"


@dataclass
class SolitonShot:
    """Radial profiles of one shot plus derived curvature data.

    ``r_grid[0] == 0`` holds the axis values; every derived array
    (``k``, ``R_check``, residual fields) is NaN there because
    rho'/rho is singular on the axis.
    """

    v0: float
    f1: float
    r_grid: np.ndarray
    rho: np.ndarray
    drho: np.ndarray
    v: np.ndarray
    dv: np.ndarray
    f: np.ndarray
    df: np.ndarray
    d2v: np.ndarray
    d2f: np.ndarray
    k: np.ndarray
    R_check: np.ndarray
    r_reached: float
    r_max: float
    reason: str
    classification: Classification = Classification.INCOMPLETE
    residuals: dict = field(default_factory=dict)
    normalization_constant: float = float("nan")
    normalization_residual: float = float("nan")

    @property
    def complete(self):
        return self.reason == "r_max"

    def as_dict(self):
        return {
            "v0": self.v0,
            "f1": self.f1,
            "r_max": self.r_max,
            "r_reached": self.r_reached,
            "reason": self.reason,
            "classification": self.classification.value,
            "residuals": dict(self.residuals),
            "normalization_constant": self.normalization_constant,
            "normalization_residual": self.normalization_residual,
        }


def _deviation(v):
    return np.asarray(v, dtype=float) - SQRT2


def _v2(u0, v0):
    # (1/v0 - v0/2)/4 written so that u0 = 0 gives exactly 0
    return -u0 * (2 * SQRT2 + u0) / (8 * v0)


def axis_state(v0, f1, r0=R0):
    """Second-order Taylor data at r0 from the smooth-closure constraints."""
    if not (v0 > 0 and math.isfinite(v0)):
        raise InvalidConfig(f"v0 must be positive and finite, got {v0}")
    u0 = v0 - SQRT2
    v2 = _v2(u0, v0)
    # R_b(0) = 1 + 8 v2/v0 - 2 f1, in deviation form
    R_axis = 8 * v2 / v0 - 2 * (f1 - 0.5)
    u = u0 + v2 * r0**2
    if u + SQRT2 <= 0:
        raise AxisExpansionFailure(f"axis expansion gives v <= 0 at r0 = {r0}")
    y = np.array([
        u,
        2 * v2 * r0,
        -R_axis * r0 / 6,
        (f1 - 0.5) * r0,
        -R_axis * r0**2 / 12,
        (f1 - 0.5) * r0**2 / 2,
    ])
    if not np.all(np.isfinite(y)):
        raise AxisExpansionFailure("non-finite axis data")
    return y


def _fields(r, y):
    u, p, m, G, s, g = y
    v = SQRT2 + u
    k = 1.0 / r + m
    F = 0.5 * r + G
    Rb = 4 * k * p / v - 2 * G / r - m * r - 2 * m * G
    d2v = -u * (2 * SQRT2 + u) / (2 * v) - p * p / v - k * p + F * p
    dG = 2 * d2v / v - 0.5 * Rb
    return v, k, F, Rb, d2v, dG


def _rhs(r, y):
    u, p, m, G, s, g = y
    v, k, F, Rb, d2v, dG = _fields(r, y)
    dm = -0.5 * Rb - 2 * m / r - m * m
    return np.array([p, d2v, dm, dG, m, G])


STOP_NAMES = ("v_collapse", "rho_closes", "v_blowup", "f_blowup", "dv_blowup")


def _stop_margins(r, y):
    u, p, m, G, s, g = y
    # v collapses, rho closes up (|m| r -> inf) or the profile blows up
    return (SQRT2 + u - 1e-6, 1e6 - abs(m) * r, 1e8 - abs(u), 1e8 - abs(G), 1e8 - abs(p))


def _stop_event(r, y):
    return min(_stop_margins(r, y))


_stop_event.terminal = True


def shoot(v0, r_max, f1=0.5, r0=R0, rtol=1e-12, atol=1e-14, dr_out=DR_OUT):
    """Integrate from the axis and classify the outcome.

    ``f1 = f''(0)`` is the second free axis parameter; ``f1 = 1/2`` is
    the value taken by the cylinder.
    """
    if not (isinstance(v0, (int, float, np.floating)) and v0 > 0):
        raise InvalidConfig(f"v0 must be > 0, got {v0}")
    if not (0 < r_max <= R_MAX_LIMIT):
        raise InvalidConfig(f"r_max must lie in (0, {R_MAX_LIMIT}], got {r_max}")
    if r_max <= r0:
        raise InvalidConfig(f"r_max must exceed the axis radius {r0}")
    y0 = axis_state(float(v0), float(f1), r0)
    sol = solve_ivp(_rhs, (r0, r_max), y0, method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True, events=_stop_event)
    if sol.status == 1:
        reason = "singular:" + STOP_NAMES[int(np.argmin(_stop_margins(sol.t[-1], sol.y[:, -1])))]
    elif sol.status == -1:
        reason = "step_underflow"
    else:
        reason = "r_max"
    r_end = float(sol.t[-1])
    n = max(int(math.ceil((r_end - r0) / dr_out)), 4)
    r = np.linspace(r0, r_end, n + 1)
    y = sol.sol(r)
    y[:, 0] = y0
    y[:, -1] = sol.y[:, -1]
    shot = _assemble(float(v0), float(f1), r, y, r_end, float(r_max), reason)
    classify(shot)
    return shot


def _assemble(v0, f1, r, y, r_end, r_max, reason):
    u, p, m, G, s, g = y
    v, k, F, Rb, d2v, dG = _fields(r, y)
    nan = np.array([np.nan])
    return SolitonShot(
        v0=v0, f1=f1,
        r_grid=np.concatenate([[0.0], r]),
        rho=np.concatenate([[0.0], r * np.exp(s)]),
        drho=np.concatenate([[1.0], r * np.exp(s) * k]),
        v=np.concatenate([[v0], v]),
        dv=np.concatenate([[0.0], p]),
        f=np.concatenate([[0.0], 0.25 * r * r + g]),
        df=np.concatenate([[0.0], F]),
        d2v=np.concatenate([nan, d2v]),
        d2f=np.concatenate([nan, 0.5 + dG]),
        k=np.concatenate([nan, k]),
        R_check=np.concatenate([nan, Rb]),
        r_reached=r_end, r_max=r_max, reason=reason,
    )


def from_profiles(r, v, dv, d2v, F, dF, k, R_check, f=None, v0=None, f1=None):
    """Build a shot from analytic profiles (r > 0 samples only)."""
    r = np.asarray(r, dtype=float)
    if f is None:
        f = np.concatenate([[0.0], np.cumsum(0.5 * (F[1:] + F[:-1]) * np.diff(r))])
    rho = np.exp(np.cumsum(np.concatenate([[0.0], 0.5 * (k[1:] + k[:-1]) * np.diff(r)]))) * r[0]
    shot = SolitonShot(
        v0=float(v[0]) if v0 is None else v0,
        f1=float(dF[0]) if f1 is None else f1,
        r_grid=r, rho=rho, drho=rho * k, v=np.asarray(v, float), dv=np.asarray(dv, float),
        f=np.asarray(f, float), df=np.asarray(F, float), d2v=np.asarray(d2v, float),
        d2f=np.asarray(dF, float), k=np.asarray(k, float), R_check=np.asarray(R_check, float),
        r_reached=float(r[-1]), r_max=float(r[-1]), reason="r_max",
    )
    return shot


def _pointwise(shot):
    mask = np.isfinite(shot.k)
    r = shot.r_grid[mask]
    v, p, d2v = shot.v[mask], shot.dv[mask], shot.d2v[mask]
    F, dF, k, Rb = shot.df[mask], shot.d2f[mask], shot.k[mask], shot.R_check[mask]
    u = _deviation(v)
    G = F - 0.5 * r
    dG = dF - 0.5
    m = k - 1.0 / r
    # Hessians of v and f in the orthonormal frame (e_r, e_theta)
    A = np.stack([d2v, k * p])
    B = np.stack([dF, k * F])
    lam2_minus_half = (-u * (2 * SQRT2 + u) - 2 * p * p) / (2 * v * v)
    lam2 = 0.5 + lam2_minus_half
    a2 = -(A[0] + A[1]) / v
    b1 = Rb - lam2
    # trace-free parts; B[0] - B[1] written in deviation form
    A_tf = 0.5 * (A[0] - A[1])
    B_tf = 0.5 * (dG - G / r - m * (0.5 * r) - m * G)
    return dict(r=r, v=v, p=p, F=F, k=k, Rb=Rb, A=A, B=B, a2=a2, b1=b1,
                lam2=lam2, lam2_minus_half=lam2_minus_half, A_tf=A_tf, B_tf=B_tf,
                u=u, m=m, G=G)


def _spline_derivative(r, y):
    if len(r) < 4 or np.all(y == y[0]):
        return np.zeros_like(y)
    return CubicSpline(r, y)(r, 1)


def identity_residuals(shot):
    """Max-over-r residuals of the soliton identities on ``shot``.

    Keys:
      a2_plus_lambda2  |a2 + lambda2 - 1/2|
      a2_b1            |a2 b1|
      grad_f_grad_v    |f' v'|
      nicer            ||A°|^2 - (v/2)^2 |B°|^2|
      nice             |(2/v)(|A|^2 - (tr A)^2/2) - (v/2)(|B|^2 - (tr B)^2/2)|
      base_tensor      max |(R_b - 1)/2 g - (2/v) A + B| with v'', f'' from splines
      id1, id2         that tensor contracted with A and with B
      fiber_scalar     |v^{-1}(tr A - f'v') - (1 - v'^2)/v^2 + 1/2|
    """
    q = _pointwise(shot)
    if q["r"].size == 0:
        raise InvalidConfig("shot has no samples off the axis")
    r, v, p, F, k, Rb = q["r"], q["v"], q["p"], q["F"], q["k"], q["Rb"]
    A, B = q["A"], q["B"]
    res = {}
    res["a2_plus_lambda2"] = np.abs(q["a2"] + q["lam2_minus_half"])
    res["a2_b1"] = np.abs(q["a2"] * q["b1"])
    res["grad_f_grad_v"] = np.abs(F * p)
    res["nicer"] = np.abs(2 * q["A_tf"] ** 2 - (0.5 * v) ** 2 * 2 * q["B_tf"] ** 2)
    nA = A[0] ** 2 + A[1] ** 2 - 0.5 * (A[0] + A[1]) ** 2
    nB = B[0] ** 2 + B[1] ** 2 - 0.5 * (B[0] + B[1]) ** 2
    res["nice"] = np.abs(2 / v * nA - 0.5 * v * nB)
    # the base tensor with second derivatives taken independently of the ODE
    d2v_s = _spline_derivative(r, p)
    dG_s = _spline_derivative(r, q["G"])
    E_rr = 0.5 * Rb - 2 * d2v_s / v + dG_s
    E_tt = 0.5 * Rb - 2 * k * p / v + (q["G"] / r + q["m"] * (0.5 * r) + q["m"] * q["G"])
    A_s = np.stack([d2v_s, k * p])
    B_s = np.stack([0.5 + dG_s, k * F])
    res["base_tensor"] = np.hypot(E_rr, E_tt)
    res["id1"] = np.abs(E_rr * A_s[0] + E_tt * A_s[1])
    res["id2"] = np.abs(E_rr * B_s[0] + E_tt * B_s[1])
    res["fiber_scalar"] = np.abs((A[0] + A[1] - F * p) / v - q["lam2_minus_half"])
    return {key: float(np.max(val)) for key, val in res.items()}, res


LEMMA_KEYS = ("a2_plus_lambda2", "a2_b1", "grad_f_grad_v", "nicer")


def normalization(shot):
    """Fit c in R + |f'|^2 - f = c; returns (c, max deviation)."""
    q = _pointwise(shot)
    r, v, p, F = q["r"], q["v"], q["p"], q["F"]
    f = shot.f[np.isfinite(shot.k)]
    # R = R_b - 4 (tr A)/v + 2 lambda2 for two-dimensional fibers
    R = q["Rb"] + 4 * q["a2"] + 2 * q["lam2"]
    val = R + F * F - f
    c = float(np.mean(val))
    return c, float(np.max(np.abs(val - c)))


def classify(shot, tol=IDENTITY_TOL):
    """Fill residuals and classification in place and return the label."""
    maxima, _ = identity_residuals(shot)
    shot.residuals = maxima
    shot.normalization_constant, shot.normalization_residual = normalization(shot)
    if not shot.complete:
        shot.classification = Classification.INCOMPLETE
    elif any(maxima[key] > tol for key in LEMMA_KEYS):
        shot.classification = Classification.IDENTITY_VIOLATED
    else:
        shot.classification = Classification.CYLINDER
    return shot.classification


def default_sweep():
    return [round(0.6 + 0.2 * i, 10) for i in range(13)]


def classify_sweep(v0_list, r_max=50.0, f1=0.5):
    """Shoot every v0 and tabulate classifications.

    The report is numerical evidence for rigidity, not a proof: shots
    that reach r_max with nonzero lemma residuals are local solutions
    that cannot be complete shrinkers.
    """
    v0_list = list(v0_list)
    if not v0_list:
        raise InvalidConfig("classify_sweep needs a nonempty v0 list")
    rows = []
    for v0 in v0_list:
        shot = shoot(v0, r_max, f1=f1)
        rows.append({
            "v0": float(v0),
            "classification": shot.classification.value,
            "r_reached": shot.r_reached,
            "reason": shot.reason,
            "max_lemma_residual": max(shot.residuals[k] for k in LEMMA_KEYS),
            "normalization_residual": shot.normalization_residual,
        })
    cylinders = [row["v0"] for row in rows if row["classification"] == Classification.CYLINDER.value]
    unexpected = [v for v in cylinders if abs(v - SQRT2) > CYLINDER_WINDOW]
    return {
        "r_max": float(r_max),
        "f1": float(f1),
        "rows": rows,
        "cylinders": cylinders,
        "unexpected_cylinders": unexpected,
        "note": "ODE sweep is numerical evidence, not a proof of rigidity",
    }


def write_profiles_csv(shot, path):
    cols = ["r", "rho", "drho", "v", "dv", "f", "df", "R_check"]
    data = np.column_stack([shot.r_grid, shot.rho, shot.drho, shot.v, shot.dv,
                            shot.f, shot.df, shot.R_check])
    np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")
