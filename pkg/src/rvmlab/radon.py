"""Radon transform on R^3, its inversion, and the 1D wave reduction.

The transform integrates a function over the plane ``{x : omega . x = p}``.
Plane integrals use a tensor Gauss-Legendre rule on a square of half-width
``L`` in an orthonormal frame completing ``omega``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .quadrature import SphereRule, gauss_legendre, lebedev

ScalarField = Callable[[np.ndarray], np.ndarray]


class InsufficientSampling(ValueError):
    """The p-grid cannot support the requested derivatives or probes."""


@dataclass(frozen=True)
class PlaneQuadratureSpec:
    half_extent: float = 6.0
    nodes: int = 64

    def __post_init__(self):
        if self.nodes < 2:
            raise ValueError("need at least two nodes per axis")
        if not self.half_extent > 0:
            raise ValueError("half extent must be positive")


@dataclass(frozen=True)
class RadonSample:
    omega: np.ndarray
    p: float
    value: float
    error: float
    extent: float
    nodes: int
    truncated: bool = False


def plane_frame(omega) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal completion of ``omega``.

    Gram-Schmidt against the coordinate axis least aligned with ``omega``
    (lowest index on ties), so the frame is reproducible.
    """
    omega = np.asarray(omega, float)
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(omega)))] = 1.0
    e1 = axis - (axis @ omega) * omega
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(omega, e1)
    return e1, e2


def _plane_integral(f: ScalarField, omega: np.ndarray, p: np.ndarray, L: float, n: int) -> np.ndarray:
    u, w = gauss_legendre(n, -L, L)
    e1, e2 = plane_frame(omega)
    plane = (u[:, None, None] * e1 + u[None, :, None] * e2).reshape(-1, 3)
    ww = np.outer(w, w).ravel()
    pts = p[:, None, None] * omega[None, None, :] + plane[None, :, :]
    vals = np.asarray(f(pts.reshape(-1, 3)), float).reshape(p.size, -1)
    return vals @ ww


def radon_forward(f: ScalarField, omega, p, spec: PlaneQuadratureSpec = PlaneQuadratureSpec(),
                  support_radius: float | None = None) -> RadonSample | list[RadonSample]:
    """Plane integral of ``f`` with an error estimate from a half-size rule.

    If ``support_radius`` is given and exceeds the plane extent the sample is
    flagged as truncated.
    """
    omega = np.asarray(omega, float)
    if abs(np.linalg.norm(omega) - 1.0) > 1e-12:
        raise ValueError("omega must be a unit vector")
    scalar = np.ndim(p) == 0
    ps = np.atleast_1d(np.asarray(p, float))
    fine = _plane_integral(f, omega, ps, spec.half_extent, spec.nodes)
    coarse = _plane_integral(f, omega, ps, spec.half_extent, max(2, spec.nodes // 2))
    truncated = support_radius is not None and support_radius > spec.half_extent
    out = [RadonSample(omega.copy(), float(pp), float(v), float(abs(v - c)),
                       spec.half_extent, spec.nodes, truncated)
           for pp, v, c in zip(ps, fine, coarse)]
    return out[0] if scalar else out


def radon_family(f: ScalarField, directions: np.ndarray, p_grid: np.ndarray,
                 spec: PlaneQuadratureSpec = PlaneQuadratureSpec()) -> np.ndarray:
    """Values ``g[i, j] = R f(directions[i], p_grid[j])``."""
    directions = np.atleast_2d(directions)
    p_grid = np.asarray(p_grid, float)
    return np.stack([_plane_integral(f, w, p_grid, spec.half_extent, spec.nodes) for w in directions])


def export_family_csv(path, directions, p_grid, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega1", "omega2", "omega3", "p", "value"])
        for i, om in enumerate(np.atleast_2d(directions)):
            for j, pp in enumerate(p_grid):
                w.writerow([repr(float(om[0])), repr(float(om[1])), repr(float(om[2])),
                            repr(float(pp)), repr(float(values[i, j]))])


def radon_inverse(values: np.ndarray, rule: SphereRule, p_grid: np.ndarray, x) -> np.ndarray:
    """Inversion from sampled transforms on the nodes of ``rule``.

    ``values[i, :]`` samples the transform along ``rule.points[i]`` on the
    uniform ``p_grid``; second p-derivatives come from cubic splines.
    """
    p_grid = np.asarray(p_grid, float)
    x = np.atleast_2d(np.asarray(x, float))
    if p_grid.size < 8:
        raise InsufficientSampling("need at least 8 p samples for a second derivative")
    proj = x @ rule.points.T  # (n_x, n_omega)
    if proj.min() < p_grid[0] or proj.max() > p_grid[-1]:
        raise InsufficientSampling("probe projections fall outside the sampled p range")
    second = np.empty_like(proj)
    for i in range(rule.size):
        spline = CubicSpline(p_grid, values[i], bc_type="natural")
        second[:, i] = spline(proj[:, i], 2)
    return -0.5 / (2.0 * np.pi) ** 2 * (second @ rule.weights)


def radon_round_trip(f: ScalarField, x, rule: SphereRule | None = None,
                     p_grid: np.ndarray | None = None,
                     spec: PlaneQuadratureSpec = PlaneQuadratureSpec(5.0, 40)) -> np.ndarray:
    """Forward transform on the nodes of ``rule`` followed by the inversion."""
    rule = rule or lebedev(23)
    if p_grid is None:
        p_grid = np.linspace(-0.9 * spec.half_extent, 0.9 * spec.half_extent, 361)
    g = radon_family(f, rule.points, p_grid, spec)
    return radon_inverse(g, rule, p_grid, x)


def p_derivative(f: ScalarField, omega, p: float, spec: PlaneQuadratureSpec = PlaneQuadratureSpec(),
                 h: float = 1e-2) -> float:
    """Fourth-order central difference in p of the transform."""
    omega = np.asarray(omega, float)
    ps = p + h * np.array([-2.0, -1.0, 1.0, 2.0])
    g = _plane_integral(f, omega, ps, spec.half_extent, spec.nodes)
    return float((g[0] - 8 * g[1] + 8 * g[2] - g[3]) / (12 * h))


def duhamel_1d(g: Callable[[np.ndarray, np.ndarray], np.ndarray], v1: Callable[[np.ndarray], np.ndarray] | None,
               t: float, p: float, n: int = 32) -> dict:
    """Solution of v_tt - v_pp = g with v(0) = 0 and v_t(0) = v1.

    Returns v, its time derivative and its p-derivative, each by
    Gauss-Legendre quadrature over the backward characteristic triangle.
    """
    if t == 0.0:
        return {"v": 0.0, "v_t": 0.0 if v1 is None else float(v1(np.array([p]))[0]), "v_p": 0.0}
    s, ws = gauss_legendre(n, 0.0, t)
    u, wu = np.polynomial.legendre.leggauss(n)
    half = t - s  # half-width of the triangle slice at time s
    ys = p + half[:, None] * u[None, :]
    area = np.sum(ws[:, None] * half[:, None] * wu[None, :] * g(np.repeat(s[:, None], n, 1), ys))
    v = 0.5 * area
    right = g(s, p + t - s)
    left = g(s, p - t + s)
    v_t = 0.5 * np.sum(ws * (right + left))
    v_p = 0.5 * np.sum(ws * (right - left))
    if v1 is not None:
        y, wy = gauss_legendre(n, p - t, p + t)
        v += 0.5 * float(np.sum(wy * v1(y)))
        e = v1(np.array([p + t, p - t]))
        v_t += 0.5 * float(e[0] + e[1])
        v_p += 0.5 * float(e[0] - e[1])
    return {"v": float(v), "v_t": float(v_t), "v_p": float(v_p)}
