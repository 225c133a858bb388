"""Pure gyration in a vertical field ``b_e(x_3) e_3`` scaled by ``1/eps``.

With momentum transport only, ``f(t, x, xi) = P(x, phi(x)/eps, R xi)`` where
``R`` rotates about ``e_3`` by the angle ``t b_e(x_3) / (eps <xi>)``. The
module integrates the reduced characteristics numerically and compares with
that closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..kinematics import lorentz_factor, rel_velocity


def _rotate(xi: np.ndarray, angle: np.ndarray) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.stack([c * xi[:, 0] - s * xi[:, 1], s * xi[:, 0] + c * xi[:, 1], xi[:, 2]], axis=1)


def _bump(u2):
    return np.where(u2 < 1.0, (1.0 - np.minimum(u2, 1.0)) ** 4, 0.0)


@dataclass(frozen=True)
class GyroProfile:
    """``P(x, y, xi) = chi(x) (1 + a cos y_1) m(xi)`` with a gyrophase-dependent ``m``.

    ``m(xi) = (1 + xi_1 + xi_1 xi_2) b(|xi| / R)`` depends on the angle about
    ``e_3`` unless ``isotropic`` is set, in which case ``m = b``. The wide
    spatial envelope keeps its own gradient small next to the fast term.
    """

    radius: float = 20.0
    xi_radius: float = 1.5
    modulation: float = 0.5
    isotropic: bool = False

    def __call__(self, x, y, xi) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        xi = np.atleast_2d(np.asarray(xi, float))
        chi = _bump(np.sum(x * x, axis=1) / self.radius ** 2)
        fast = 1.0 + self.modulation * np.cos(np.atleast_2d(y)[:, 0])
        b = _bump(np.sum(xi * xi, axis=1) / self.xi_radius ** 2)
        m = b if self.isotropic else (1.0 + xi[:, 0] + xi[:, 0] * xi[:, 1]) * b
        return chi * fast * m


@dataclass(frozen=True)
class GyrationConfig:
    eps: float = 0.1
    b_e: Callable[[np.ndarray], np.ndarray] = field(default=lambda x3: np.ones_like(np.asarray(x3, float)))
    profile: Callable = field(default_factory=GyroProfile)
    phi: Callable[[np.ndarray], np.ndarray] = field(default=lambda x: np.asarray(x, float))

    def initial(self, x, xi) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        return self.profile(x, self.phi(x) / self.eps, xi)


def explicit_solution(cfg: GyrationConfig, t: float, x, xi) -> np.ndarray:
    """Closed form: the profile at the momentum rotated back to time 0."""
    x = np.atleast_2d(np.asarray(x, float))
    xi = np.atleast_2d(np.asarray(xi, float))
    angle = t * np.asarray(cfg.b_e(x[:, 2]), float) / (cfg.eps * lorentz_factor(xi))
    return cfg.initial(x, _rotate(xi, angle))


def printed_solution(cfg: GyrationConfig, t: float, x, xi) -> np.ndarray:
    """Variant whose rotation rate uses sqrt(1 + r^2) with r the transverse momentum."""
    x = np.atleast_2d(np.asarray(x, float))
    xi = np.atleast_2d(np.asarray(xi, float))
    gt = np.sqrt(1.0 + xi[:, 0] ** 2 + xi[:, 1] ** 2)
    angle = t * np.asarray(cfg.b_e(x[:, 2]), float) / (cfg.eps * gt)
    return cfg.initial(x, _rotate(xi, angle))


def trace_back(cfg: GyrationConfig, t: float, x, xi, steps_per_radian: int = 200) -> np.ndarray:
    """RK4 for ``d xi/ds = nu(xi) x B_e(x) / eps`` from ``s = t`` back to 0, x frozen."""
    x = np.atleast_2d(np.asarray(x, float))
    xi = np.array(np.atleast_2d(xi), float)
    b = np.asarray(cfg.b_e(x[:, 2]), float)
    B = np.zeros_like(xi)
    B[:, 2] = b / cfg.eps
    rate = float(np.max(np.abs(B[:, 2]) / lorentz_factor(xi))) if xi.size else 0.0
    n = max(1, int(math.ceil(rate * abs(t) * steps_per_radian)))
    h = -t / n

    def rhs(p):
        return np.cross(rel_velocity(p), B)

    for _ in range(n):
        k1 = rhs(xi)
        k2 = rhs(xi + 0.5 * h * k1)
        k3 = rhs(xi + 0.5 * h * k2)
        k4 = rhs(xi + h * k3)
        xi = xi + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return xi


def numeric_solution(cfg: GyrationConfig, t: float, x, xi, steps_per_radian: int = 200) -> np.ndarray:
    return cfg.initial(x, trace_back(cfg, t, x, xi, steps_per_radian))


def gradient_sup(cfg: GyrationConfig, t: float, x, xi, rel_step: float = 1e-4) -> float:
    """Largest |grad_x f| over the probes by central differences of step ``rel_step * eps``."""
    x = np.atleast_2d(np.asarray(x, float))
    h = rel_step * cfg.eps
    g = np.zeros(x.shape)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        g[:, j] = (explicit_solution(cfg, t, x + e, xi) - explicit_solution(cfg, t, x - e, xi)) / (2 * h)
    return float(np.max(np.linalg.norm(g, axis=1)))


def default_probes(n: int = 200, seed: int = 0, x_extent: float = 3.0, xi_extent: float = 1.2):
    rng = np.random.default_rng(seed)
    return rng.uniform(-x_extent, x_extent, (n, 3)), rng.uniform(-xi_extent, xi_extent, (n, 3))


def gradient_probes(n: int = 2001, extent: float = 3.0, phases: int = 32, r: float = 0.6, xi3: float = 0.2):
    """Dense line along x_1 times a ring of gyrophases at fixed (r, xi_3).

    Sampling every phase makes the sup insensitive to how far the momenta
    have rotated.
    """
    line = np.zeros((n, 3))
    line[:, 0] = np.linspace(-extent, extent, n)
    th = 2.0 * np.pi * np.arange(phases) / phases
    ring = np.stack([r * np.cos(th), r * np.sin(th), np.full(phases, xi3)], axis=1)
    return np.repeat(line, phases, axis=0), np.tile(ring, (n, 1))


def simplified_gyration(cfg: GyrationConfig, t: float, probes=None, steps_per_radian: int = 200) -> dict:
    """Numeric against explicit solution at the probes, plus the printed-rate deviation."""
    x, xi = probes if probes is not None else default_probes()
    num = numeric_solution(cfg, t, x, xi, steps_per_radian)
    exp = explicit_solution(cfg, t, x, xi)
    f0 = cfg.initial(x, xi)
    return {"eps": cfg.eps, "t": float(t), "probes": int(np.atleast_2d(x).shape[0]),
            "max_error": float(np.max(np.abs(num - exp))),
            "max_change": float(np.max(np.abs(exp - f0))),
            "printed_rate_deviation": float(np.max(np.abs(printed_solution(cfg, t, x, xi) - exp)))}


def gradient_growth(eps_values=(1.0, 0.5, 0.25), t: float = 1.0, base: GyrationConfig = GyrationConfig(),
                    probes=None) -> dict:
    """sup |grad_x f| against eps, with the log-log slope (expected near -1)."""
    x, xi = probes if probes is not None else gradient_probes()
    sups = {}
    for eps in eps_values:
        cfg = GyrationConfig(float(eps), base.b_e, base.profile, base.phi)
        sups[float(eps)] = gradient_sup(cfg, t, x, xi)
    e = np.array(sorted(sups))
    v = np.array([sups[k] for k in e])
    slope = float(np.polyfit(np.log(e), np.log(v), 1)[0])
    return {"sup_grad": sups, "slope": slope, "scaled": {k: sups[k] * k for k in sups}}
