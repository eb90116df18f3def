"""Fiber descriptions and discretized flow states.

The S^1 state stores the metric density phi on a fixed theta grid; the torus
state stores the three components of the base metric and the log-warpings.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidConfig


class BaseKind(str, Enum):
    CIRCLE = "CircleS1"
    TORUS = "TorusT2"

    @property
    def dim(self) -> int:
        return 1 if self is BaseKind.CIRCLE else 2


@dataclass(frozen=True)
class FiberSpec:
    """Round sphere S^n with Einstein constant mu (sectional curvature mu/(n-1))."""

    n: int
    mu: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise InvalidConfig(f"fiber dimension n_a ≥ 2 required, got {self.n}")
        if self.mu < 0:
            raise InvalidConfig(f"Einstein constant mu_a ≥ 0 required, got {self.mu}")

    @property
    def lambda_hat(self) -> float:
        return self.mu / (self.n - 1)

    @classmethod
    def unit_sphere(cls, n: int) -> "FiberSpec":
        return cls(n, float(n - 1))


@dataclass(frozen=True)
class WarpedProductSpec:
    """Base kind, fibers, and initial warping functions of the base coordinates.

    ``initial_warpings[a]`` is a callable of theta (circle) or (x, y) (torus)
    returning v_a. ``base_metric`` optionally overrides the flat/unit base:
    a callable phi(theta) on the circle, or (x, y) -> (g11, g12, g22) on the torus.
    """

    base: BaseKind
    fibers: tuple
    initial_warpings: tuple
    base_metric: Callable | None = None

    def __post_init__(self):
        if len(self.fibers) == 0:
            raise InvalidConfig("at least one fiber is required")
        if len(self.initial_warpings) != len(self.fibers):
            raise InvalidConfig("one initial warping per fiber is required")

    @property
    def N(self) -> int:
        return self.base.dim + sum(f.n for f in self.fibers)


def _as_fibers(fibers: Sequence[FiberSpec]) -> tuple:
    return tuple(fibers)


@dataclass
class FlowStateS1:
    t: float
    theta: np.ndarray
    phi: np.ndarray
    v: np.ndarray  # shape (A, M)
    fibers: tuple = field(default_factory=tuple)

    @property
    def h(self) -> float:
        return float(2 * np.pi / self.theta.size)

    @property
    def M(self) -> int:
        return self.theta.size

    def length(self) -> float:
        return float(np.sum(self.phi) * self.h)

    def copy(self, **changes) -> "FlowStateS1":
        new = replace(self, **changes)
        new.phi = np.array(new.phi, dtype=float)
        new.v = np.array(new.v, dtype=float)
        return new


@dataclass
class FlowStateSurface:
    t: float
    x: np.ndarray
    y: np.ndarray
    g: np.ndarray  # shape (3, Mx, My): g11, g12, g22
    w: np.ndarray  # shape (A, Mx, My), w_a = log v_a
    fibers: tuple = field(default_factory=tuple)

    @property
    def h(self) -> tuple:
        return (float(2 * np.pi / self.x.size), float(2 * np.pi / self.y.size))

    @property
    def v(self) -> np.ndarray:
        return np.exp(self.w)

    def copy(self, **changes) -> "FlowStateSurface":
        new = replace(self, **changes)
        new.g = np.array(new.g, dtype=float)
        new.w = np.array(new.w, dtype=float)
        return new


def state_from_spec(spec: WarpedProductSpec, M, t: float = 0.0):
    """Sample a WarpedProductSpec on a uniform periodic grid."""
    if spec.base is BaseKind.CIRCLE:
        theta = np.arange(M) * (2 * np.pi / M)
        phi = np.ones(M) if spec.base_metric is None else np.asarray(spec.base_metric(theta), float)
        v = np.array([np.broadcast_to(f(theta), theta.shape) for f in spec.initial_warpings], float)
        return FlowStateS1(t, theta, phi, v, _as_fibers(spec.fibers))
    mx, my = (M, M) if np.isscalar(M) else M
    x = np.arange(mx) * (2 * np.pi / mx)
    y = np.arange(my) * (2 * np.pi / my)
    X, Y = np.meshgrid(x, y, indexing="ij")
    if spec.base_metric is None:
        g = np.stack([np.ones_like(X), np.zeros_like(X), np.ones_like(X)])
    else:
        g = np.array([np.broadcast_to(c, X.shape) for c in spec.base_metric(X, Y)], float)
    v = np.array([np.broadcast_to(f(X, Y), X.shape) for f in spec.initial_warpings], float)
    if np.any(v <= 0):
        raise InvalidConfig("initial warpings must be strictly positive")
    return FlowStateSurface(t, x, y, g, np.log(v), _as_fibers(spec.fibers))
