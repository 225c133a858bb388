"""Numerical checks of two oscillatory sphere integrals and the trace identity.

The trace identity turns a conditionally convergent integral over
``rho in R`` and ``x in R^3`` into an integral over a sphere of radius
``|tau|``. The left side is regularized by Gaussian damping in ``rho`` and
extrapolated to zero damping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .quadrature import SphereRule, composite_gauss_legendre, lebedev, product_sphere, richardson


def _norm(X) -> float:
    r = float(np.linalg.norm(X))
    if r == 0.0:
        raise ValueError("need |X| > 0")
    return r


def sphere_identity(X, rho: float, tau: float, rule: SphereRule | None = None) -> dict:
    """Sphere integral of exp(i rho (omega.X + tau)) (i rho) against its closed form."""
    X = np.asarray(X, float)
    R = _norm(X)
    rule = rule or lebedev(47)
    phase = np.exp(1j * rho * (rule.points @ X + tau))
    lhs = complex(np.sum(rule.weights * phase) * (1j * rho))
    rhs = complex(4j * np.pi * np.exp(1j * rho * tau) * math.sin(rho * R) / R)
    return {"lhs": lhs, "rhs": rhs, "error": abs(lhs - rhs), "rule": rule.name}


def sphere_gradient_identity(X, nu, rho: float, tau: float, rule: SphereRule | None = None) -> dict:
    """Sphere integral of (nu.omega) exp(i rho (omega.X + tau)) rho^2 against its closed form."""
    X = np.asarray(X, float)
    nu = np.asarray(nu, float)
    R = _norm(X)
    rule = rule or lebedev(47)
    phase = np.exp(1j * rho * (rule.points @ X + tau))
    lhs = complex(np.sum(rule.weights * (rule.points @ nu) * phase) * rho * rho)
    pref = 2.0 * np.pi * float(nu @ X) / R ** 3
    rhs = complex(pref * sum((sgn - 1j * rho * R) * np.exp(1j * rho * (sgn * R + tau))
                             for sgn in (1.0, -1.0)))
    return {"lhs": lhs, "rhs": rhs, "error": abs(lhs - rhs), "rule": rule.name}


def heaviside(x: float) -> float:
    """Step function with the half-maximum value at the origin."""
    return 1.0 if x > 0 else (0.5 if x == 0 else 0.0)


@dataclass(frozen=True)
class RegularizationSchedule:
    deltas: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)

    def __post_init__(self):
        d = np.asarray(self.deltas, float)
        if len(d) < 2 or np.any(d <= 0) or np.any(np.diff(d) >= 0):
            raise ValueError("damping widths must be positive and strictly decreasing")

    def halved(self) -> "RegularizationSchedule":
        return RegularizationSchedule(tuple(self.deltas[1:]) + (self.deltas[-1] / 2,))


@dataclass(frozen=True)
class TraceIdentityCase:
    """Inputs of the trace identity.

    ``f`` must be negligible outside the ball ``B(center, radius)``.
    """

    X: tuple[float, float, float]
    alpha: float
    tau: float
    sign: int
    K: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 5.0
    label: str = ""

    def __post_init__(self):
        if self.alpha > 2:
            raise ValueError("alpha must be <= 2")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")


def damped_rho_kernel(u, delta: float) -> np.ndarray:
    """Integral over rho in R of exp(i rho u) exp(-(delta rho)^2 / 2)."""
    u = np.asarray(u, float)
    return math.sqrt(2.0 * np.pi) / delta * np.exp(-0.5 * (u / delta) ** 2)


def damped_rho_kernel_numeric(u, delta: float, n_panels: int = 64, n: int = 16) -> np.ndarray:
    """Same integral by direct quadrature over |rho| <= 9 / delta."""
    u = np.atleast_1d(np.asarray(u, float))
    cut = 9.0 / delta
    rho, w = composite_gauss_legendre(np.linspace(-cut, cut, n_panels + 1), n)
    damp = np.exp(-0.5 * (delta * rho) ** 2) * w
    return np.real(np.exp(1j * np.outer(u, rho)) @ damp)


def _radial_rule(case: TraceIdentityCase, delta: float, width: float = 8.5):
    """Nodes covering the damping band where the kernel is not negligible."""
    r_star = -case.sign * case.tau
    reach = float(np.linalg.norm(np.asarray(case.X) - np.asarray(case.center))) + case.radius
    lo = max(0.0, r_star - width * delta)
    hi = min(reach, r_star + width * delta)
    if hi <= lo:
        return np.zeros(0), np.zeros(0)
    panels = max(8, int(math.ceil((hi - lo) / (0.25 * delta))))
    return composite_gauss_legendre(np.linspace(lo, hi, panels + 1), 8)


def regularized_lhs(case: TraceIdentityCase, delta: float, rule: SphereRule,
                    kernel: Callable = damped_rho_kernel) -> float:
    """Damped left side: the rho-integral in closed form, the x-integral in
    polar coordinates about X."""
    r, wr = _radial_rule(case, delta)
    if r.size == 0:
        return 0.0
    X = np.asarray(case.X, float)
    pts = X[None, None, :] + r[:, None, None] * rule.points[None, :, :]
    fv = np.asarray(case.f(pts.reshape(-1, 3)), float).reshape(r.size, rule.size)
    kv = np.asarray(case.K(rule.points), float)
    radial = wr * r ** (2.0 - case.alpha) * kernel(case.sign * r + case.tau, delta)
    return float(radial @ fv @ (rule.weights * kv))


def trace_rhs(case: TraceIdentityCase, rule: SphereRule) -> float:
    """Trace integral over the sphere of radius |tau| about X."""
    t = abs(case.tau)
    h = heaviside(-case.sign * case.tau)
    if h == 0.0:
        return 0.0
    X = np.asarray(case.X, float)
    fv = np.asarray(case.f(X[None, :] + t * rule.points), float)
    kv = np.asarray(case.K(rule.points), float)
    radial = 1.0 if case.alpha == 2 else t ** (2.0 - case.alpha)
    return float(2.0 * np.pi * radial * h * np.sum(rule.weights * kv * fv))


def case_scale(case: TraceIdentityCase, rule: SphereRule, reference_radius: float = 0.5) -> float:
    """Size the trace would have on a sphere of radius max(|tau|, reference)."""
    t = max(abs(case.tau), reference_radius)
    X = np.asarray(case.X, float)
    fv = np.abs(np.asarray(case.f(X[None, :] + t * rule.points), float))
    kv = np.abs(np.asarray(case.K(rule.points), float))
    return float(2.0 * np.pi * t ** (2.0 - case.alpha) * np.sum(rule.weights * kv * fv))


def _exponents(case: TraceIdentityCase, n: int) -> list[int]:
    # Interior stationary point: the damping error is even in delta.
    # Stationary point on the boundary r = 0: every power appears.
    if case.tau != 0.0:
        return [2 * (k + 1) for k in range(n)]
    return [k + 1 for k in range(n)]


@dataclass
class TraceResult:
    lhs: float
    rhs: float
    raw: list[float]
    deltas: list[float]
    scale: float
    relative_error: float
    converged: bool
    stability: dict = field(default_factory=dict)


def trace_identity(case: TraceIdentityCase, schedule: RegularizationSchedule = RegularizationSchedule(),
                   rule: SphereRule | None = None, rhs_rule: SphereRule | None = None,
                   check_stability: bool = True, tolerance: float = 1e-3) -> TraceResult:
    """Regularized, extrapolated left side against the sphere trace.

    Stability: dropping the widest damping level and adding one half as wide
    as the narrowest must move the extrapolated value by at most a tenth of
    the error budget ``tolerance * scale``.
    """
    rule = rule or lebedev(53)
    rhs_rule = rhs_rule or product_sphere(40, 80)

    def extrapolate(sched):
        raw = [regularized_lhs(case, d, rule) for d in sched.deltas]
        ext = richardson(raw, sched.deltas, _exponents(case, len(raw) - 1))
        return raw, ext

    raw, lhs = extrapolate(schedule)
    rhs = trace_rhs(case, rhs_rule)
    scale = max(abs(rhs), case_scale(case, rhs_rule))
    steps = np.abs(np.diff(raw))
    # Successive raw differences must shrink, otherwise the ladder is not in
    # the asymptotic regime.
    converged = bool(np.all(steps[1:] <= steps[:-1] * 1.05 + 1e-14 * scale))
    stability = {}
    if check_stability:
        _, lhs2 = extrapolate(schedule.halved())
        change = abs(lhs2 - lhs)
        stability = {"halved_lhs": lhs2, "change": change, "correction": abs(raw[-1] - lhs),
                     "budget": tolerance * scale, "stable": change <= 0.1 * tolerance * scale}
    return TraceResult(lhs, rhs, raw, list(schedule.deltas), scale,
                       abs(lhs - rhs) / scale, converged, stability)


def gaussian_bump(center, sigma: float, amplitude: float = 1.0):
    c = np.asarray(center, float)

    def f(x):
        d = np.asarray(x, float) - c
        return amplitude * np.exp(-0.5 * np.sum(d * d, axis=-1) / sigma ** 2)

    return f


def default_trace_corpus() -> list[TraceIdentityCase]:
    """Gaussian bumps and smooth direction weights over alpha, sign and tau."""
    X = (0.1, -0.2, 0.15)
    bumps = [((0.0, 0.0, 0.0), 0.6), ((0.4, 0.1, -0.3), 0.8)]
    Ks = [("one", lambda w: np.ones(w.shape[0])),
          ("tilted", lambda w: 1.0 + 0.5 * w[:, 0]),
          ("polar", lambda w: w[:, 2] ** 2 + 0.2)]
    cases = []
    for (c, s) in bumps:
        f = gaussian_bump(c, s)
        for kname, K in Ks:
            for alpha in (1.0, 2.0):
                for sign in (1, -1):
                    for tau in (-0.5, 0.0, 0.5):
                        cases.append(TraceIdentityCase(X, alpha, tau, sign, K, f, c, 9.0 * s,
                                                       f"bump{c}-{kname}-a{alpha}-s{sign}-t{tau}"))
    return cases
