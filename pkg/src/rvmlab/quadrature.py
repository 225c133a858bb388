"""Quadrature rules shared across the package.

Sphere rules come in two flavours: Lebedev rules (delegated to SciPy) and
product rules built from Gauss-Legendre nodes in the polar cosine and an
equispaced trapezoid in azimuth, optionally aligned with a chosen pole.
Both families are invariant under the antipodal map omega -> -omega, which
the increment engine relies on for its parity cancellations.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import lebedev_rule

# Degrees for which SciPy ships a Lebedev rule.
LEBEDEV_DEGREES = (3, 5, 7, 9, 11, 13, 15, 17, 19, 21, 23, 25, 27, 29, 31, 35,
                   41, 47, 53, 59, 65, 71, 77, 83, 89, 95, 101, 107, 113, 119,
                   125, 131)

# Point counts of the Lebedev rules, keyed by degree.
LEBEDEV_POINTS = {3: 6, 5: 14, 7: 26, 9: 38, 11: 50, 13: 74, 15: 86, 17: 110,
                  19: 146, 21: 170, 23: 194, 25: 230, 27: 266, 29: 302,
                  31: 350, 35: 434, 41: 590, 47: 770, 53: 974, 59: 1202,
                  65: 1454, 71: 1730, 77: 2030, 83: 2354, 89: 2702, 95: 3074,
                  101: 3470, 107: 3890, 113: 4334, 119: 4802, 125: 5294,
                  131: 5810}


@dataclass(frozen=True)
class SphereRule:
    """Nodes on the unit sphere with weights summing to 4*pi."""

    points: np.ndarray  # (n, 3)
    weights: np.ndarray  # (n,)
    degree: int
    name: str

    @property
    def size(self) -> int:
        return self.weights.shape[0]

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Contract the leading axis of ``values`` against the weights."""
        return np.tensordot(self.weights, values, axes=(0, 0))


@lru_cache(maxsize=64)
def _lebedev_cached(degree: int) -> SphereRule:
    x, w = lebedev_rule(degree)
    pts = np.ascontiguousarray(x.T)
    pts.setflags(write=False)
    w = np.ascontiguousarray(w)
    w.setflags(write=False)
    return SphereRule(pts, w, degree, f"lebedev-{degree}")


def lebedev(degree: int) -> SphereRule:
    """Lebedev rule exact for spherical polynomials up to ``degree``.

    ``degree`` is rounded up to the next available rule.
    """
    if degree < 1:
        raise ValueError("degree must be positive")
    for d in LEBEDEV_DEGREES:
        if d >= degree:
            return _lebedev_cached(d)
    raise ValueError(f"no Lebedev rule of degree {degree}; max is {LEBEDEV_DEGREES[-1]}")


def lebedev_by_points(npoints: int) -> SphereRule:
    """Lebedev rule identified by its point count (e.g. 26, 110, 770)."""
    for d, n in LEBEDEV_POINTS.items():
        if n == npoints:
            return lebedev(d)
    raise ValueError(f"no Lebedev rule with {npoints} points")


def _frame(axis: np.ndarray) -> np.ndarray:
    """Rotation whose third column is ``axis`` (unit)."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(axis)))] = 1.0
    e1 = helper - axis * (helper @ axis)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return np.column_stack([e1, e2, axis])


def product_sphere(n_theta: int, n_phi: int, axis=None) -> SphereRule:
    """Gauss-Legendre in cos(theta) times trapezoid in phi.

    Exact for spherical polynomials of degree ``min(2*n_theta-1, n_phi-1)``.
    An even ``n_phi`` keeps the rule antipodally symmetric.
    """
    if n_theta < 1 or n_phi < 1:
        raise ValueError("node counts must be positive")
    u, wu = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    st = np.sqrt(1.0 - u * u)
    pts = np.stack([
        np.outer(st, np.cos(phi)).ravel(),
        np.outer(st, np.sin(phi)).ravel(),
        np.repeat(u, n_phi),
    ], axis=1)
    w = np.repeat(wu, n_phi) * (2.0 * np.pi / n_phi)
    if axis is not None:
        pts = pts @ _frame(axis).T
    degree = min(2 * n_theta - 1, n_phi - 1)
    return SphereRule(pts, w, degree, f"product-{n_theta}x{n_phi}")


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss_legendre(edges, n: int):
    """Gauss-Legendre rule of ``n`` nodes on each panel between ``edges``."""
    edges = np.asarray(edges, dtype=float)
    x, w = np.polynomial.legendre.leggauss(n)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * x[None, :]
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


@dataclass(frozen=True)
class BallRule:
    """Tensor rule on a ball: radial Gauss times a product sphere rule."""

    points: np.ndarray  # (n, 3)
    weights: np.ndarray  # (n,)
    radius: float

    @property
    def size(self) -> int:
        return self.weights.shape[0]


def ball_rule(radius: float, n_r: int, n_theta: int | None = None,
              n_phi: int | None = None) -> BallRule:
    """Rule on the ball of given radius, centrally symmetric by construction."""
    n_theta = n_r if n_theta is None else n_theta
    n_phi = 2 * n_theta if n_phi is None else n_phi
    if n_phi % 2:
        raise ValueError("n_phi must be even to keep the rule centrally symmetric")
    r, wr = gauss_legendre(n_r, 0.0, radius)
    sph = product_sphere(n_theta, n_phi)
    pts = (r[:, None, None] * sph.points[None, :, :]).reshape(-1, 3)
    w = (wr[:, None] * r[:, None] ** 2 * sph.weights[None, :]).ravel()
    return BallRule(pts, w, float(radius))


def richardson(values, steps, exponents) -> float:
    """Extrapolate ``values`` sampled at ``steps`` to step zero.

    Fits ``a + sum_k c_k * step**exponents[k]`` exactly through the samples,
    so ``len(values) == len(exponents) + 1`` is required.
    """
    values = np.asarray(values, dtype=float)
    steps = np.asarray(steps, dtype=float)
    if values.shape != steps.shape or len(values) != len(exponents) + 1:
        raise ValueError("need one more sample than extrapolation exponents")
    basis = np.column_stack([np.ones_like(steps)] + [steps ** e for e in exponents])
    coef = np.linalg.solve(basis, values)
    return float(coef[0])
