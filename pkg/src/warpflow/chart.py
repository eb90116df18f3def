"""Explicit product chart: base coordinates plus hyperspherical fiber angles."""

from dataclasses import dataclass

import numpy as np

from .errors import ChartSingularity

DELTA_POLE = 0.2


@dataclass(frozen=True)
class ChartPoint:
    """A point of the product chart.

    ``fiber_coords[a]`` holds n_a hyperspherical angles: the first n_a - 1 are
    polar angles in (0, pi) and the last is an azimuth.
    """

    base_coords: tuple
    fiber_coords: tuple

    def check(self, delta_pole: float = DELTA_POLE, tol: float = 0.0):
        for angles in self.fiber_coords:
            for psi in angles[:-1]:
                if psi < delta_pole - tol or psi > np.pi - delta_pole + tol:
                    raise ChartSingularity(
                        f"polar angle {psi:.4g} within {delta_pole} of a pole"
                    )

    def flat(self) -> np.ndarray:
        out = list(self.base_coords)
        for angles in self.fiber_coords:
            out.extend(angles)
        return np.array(out, dtype=float)


def sphere_metric_diag(angles, lambda_hat: float) -> np.ndarray:
    """Diagonal of the round metric of curvature lambda_hat in hyperspherical angles."""
    angles = np.asarray(angles, dtype=float)
    r2 = 1.0 / lambda_hat
    diag = np.empty(angles.size)
    prod = r2
    for k in range(angles.size):
        diag[k] = prod
        prod = prod * np.sin(angles[k]) ** 2
    return diag


def random_chart_point(rng, base_coords, fiber_dims, delta_pole: float = DELTA_POLE):
    fibers = []
    for n in fiber_dims:
        polar = rng.uniform(delta_pole, np.pi - delta_pole, size=n - 1)
        azim = rng.uniform(0, 2 * np.pi, size=1)
        fibers.append(tuple(np.concatenate([polar, azim])))
    return ChartPoint(tuple(float(c) for c in base_coords), tuple(fibers))
