"""Kernel weights of the momentum-increment representation and their bounds.

All functions broadcast over leading axes: ``omega``, ``xi`` and ``nu_traj``
are ``(..., 3)`` arrays, times are scalars or broadcastable arrays.
``nu_traj`` is the velocity of the traced characteristic at time ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kinematics import lorentz_factor, rel_velocity
from .quadrature import SphereRule, ball_rule, lebedev, product_sphere

FOUR_PI = 4.0 * np.pi
# Contexts this close to the light cone are rejected instead of clamped.
SINGULAR_GUARD = 1e-12


class SingularContext(ValueError):
    """1 + omega . v(xi) fell below the guard."""


@dataclass(frozen=True)
class WeightValues:
    W0: np.ndarray
    Wl: np.ndarray
    Wn: np.ndarray
    Wne: np.ndarray
    Wnb: np.ndarray


def _dot(a, b):
    return np.sum(a * b, axis=-1)


def _denominator(omega, nu):
    den = 1.0 + _dot(omega, nu)
    if np.any(den < SINGULAR_GUARD):
        raise SingularContext("1 + omega . v(xi) below the singular guard")
    return den


def weight_W0(s, omega, xi, nu_traj) -> np.ndarray:
    """Weight of the initial-data term; linear in ``s``."""
    nu = rel_velocity(xi)
    den = _denominator(omega, nu)
    return -(np.asarray(s) / FOUR_PI) * _dot(nu_traj, nu + omega) / den


def weight_Wl(s, omega, xi, nu_traj) -> np.ndarray:
    """Weight of the source term without force; independent of time."""
    del s
    nu = rel_velocity(xi)
    den = _denominator(omega, nu)
    g2 = 1.0 + _dot(xi, xi)
    return -(1.0 / FOUR_PI) * _dot(nu_traj, omega + nu) / (g2 * den * den)


def kernel_gradient(omega, xi, nu_traj) -> np.ndarray:
    """Gradient in ``xi`` of ``nu_traj . (v + omega) / (1 + omega . v)``.

    Written along the three directions ``omega``, ``nu_traj + omega`` and
    ``v + omega``, which keeps each coefficient bounded by powers of the
    single denominator ``1 + omega . v``.
    """
    nu = rel_velocity(xi)
    gam = lorentz_factor(xi)[..., None]
    den = _denominator(omega, nu)[..., None]
    near = 1.0 + _dot(omega, nu_traj)[..., None]
    cross = _dot(nu + omega, omega + nu_traj)[..., None]
    return (-(near / den) * omega
            + (nu_traj + omega) / den
            + (near / den - cross / (den * den)) * (nu + omega)) / gam


def weight_Wn(s, r, omega, xi, nu_traj) -> np.ndarray:
    """Weight multiplying the Lorentz force in the source term."""
    lag = np.asarray(s, float) - np.asarray(r, float)
    return -(np.asarray(lag)[..., None] / FOUR_PI) * kernel_gradient(omega, xi, nu_traj)


def weight_Wnb(s, r, omega, xi, nu_traj) -> np.ndarray:
    """Magnetic split: ``Wn x v(xi)``, paired with B."""
    return np.cross(weight_Wn(s, r, omega, xi, nu_traj), rel_velocity(xi))


def all_weights(s, r, omega, xi, nu_traj) -> WeightValues:
    wn = weight_Wn(s, r, omega, xi, nu_traj)
    return WeightValues(weight_W0(s, omega, xi, nu_traj), weight_Wl(s, omega, xi, nu_traj),
                        wn, wn, np.cross(wn, rel_velocity(xi)))


def jacobian_J(r, s, omega, nu_traj) -> np.ndarray:
    """Density of ``(s, omega) -> X(s) + (s - r) omega`` with respect to ``ds domega``."""
    lag = np.asarray(s, float) - np.asarray(r, float)
    if np.any(lag < 0):
        raise ValueError("need s >= r")
    return lag * lag * (1.0 + _dot(omega, nu_traj))


def pushforward_check(position, velocity, r: float, t: float, g, samples: int = 10 ** 6,
                      seed: int = 0, chunk: int = 250_000, ball_nodes: int = 24) -> dict:
    """Change of variables through ``jacobian_J`` against a direct ball integral.

    For a subluminal path ``X`` with velocity ``V`` the map
    ``(s, omega) -> X(s) + (s - r) omega`` covers ``B(X(t), t - r)`` once, so
    the Monte Carlo mean of ``g * J`` over ``[r, t] x S^2`` times
    ``4 pi (t - r)`` must equal the ball integral of ``g``.
    """
    if t <= r:
        raise ValueError("need t > r")
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        s = rng.uniform(r, t, n)
        omega = _unit(rng, n)
        vals = g(np.asarray(position(s), float) + (s - r)[:, None] * omega)
        vals = vals * jacobian_J(r, s, omega, np.asarray(velocity(s), float))
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += n
    scale = 4.0 * math.pi * (t - r)
    mean = total / samples
    stderr = scale * math.sqrt(max(total_sq / samples - mean * mean, 0.0) / samples)
    mc = scale * mean
    ball = ball_rule(t - r, ball_nodes)
    direct = float(np.dot(ball.weights, g(ball.points + np.asarray(position(np.array([t])), float)[0])))
    return {"monte_carlo": mc, "stderr": stderr, "direct": direct,
            "relative_error": abs(mc - direct) / abs(direct), "samples": samples}


# ---------------------------------------------------------------------------
# Bound suite
# ---------------------------------------------------------------------------

def _unit(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def sample_contexts(n: int, seed: int = 0, max_log_momentum: float = 4.0) -> dict:
    """Random contexts covering slow to ultra-relativistic momenta."""
    rng = np.random.default_rng(seed)
    omega = _unit(rng, n)
    xi = _unit(rng, n) * np.exp(rng.uniform(-6.0, max_log_momentum, size=(n, 1)))
    # Half the samples put xi nearly antipodal to omega, where the weights peak.
    anti = rng.random(n) < 0.5
    tilt = _unit(rng, n) * rng.uniform(0, 1e-2, size=(n, 1))
    xi[anti] = -(omega[anti] + tilt[anti]) * np.linalg.norm(xi[anti], axis=1, keepdims=True)
    speed = 1.0 - np.exp(rng.uniform(-12.0, 0.0, size=(n, 1)))
    nu_traj = _unit(rng, n) * speed
    s = rng.uniform(0.0, 10.0, size=n)
    r = s * rng.random(n)
    return {"omega": omega, "xi": xi, "nu_traj": nu_traj, "s": s, "r": r}


def bound_checks(ctx: dict) -> dict:
    """Evaluate both sides of each inequality; returns name -> (lhs, rhs)."""
    omega, xi, nu_traj, s, r = (ctx[k] for k in ("omega", "xi", "nu_traj", "s", "r"))
    nu = rel_velocity(xi)
    gam = lorentz_factor(xi)
    den = _denominator(omega, nu)
    near = 1.0 + _dot(omega, nu_traj)
    ratio = np.sqrt(near / den)
    wn = weight_Wn(s, r, omega, xi, nu_traj)
    wnb = np.cross(wn, nu)
    wn_bound = (3.0 * math.sqrt(2.0) / (2.0 * np.pi)) * (s - r) / gam * np.sqrt(near) / den
    return {
        "inverse_denominator": (1.0 / den, 2.0 * gam * gam),
        "velocity_plus_direction": (np.linalg.norm(nu + omega, axis=1), math.sqrt(2.0) * np.sqrt(den)),
        "W0": (np.abs(weight_W0(s, omega, xi, nu_traj)), (s / FOUR_PI) * (1.0 + 2.0 * ratio)),
        "Wl": (np.abs(weight_Wl(s, omega, xi, nu_traj)), (1.0 / np.pi) * (1.0 + ratio)),
        "Wne": (np.linalg.norm(wn, axis=1), wn_bound),
        "Wnb": (np.linalg.norm(wnb, axis=1), wn_bound),
    }


def bound_suite(samples: int, seed: int = 0, chunk: int = 200_000, rel_slack: float = 1e-12) -> dict:
    """Sample random contexts and count violations of every weight bound.

    A violation is ``lhs > rhs * (1 + rel_slack)``; the slack only absorbs
    rounding in the evaluation of the two sides.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    report = {"samples": samples, "seed": seed, "violations": {}, "witness": {}, "max_ratio": {}}
    done = 0
    k = 0
    while done < samples:
        n = min(chunk, samples - done)
        ctx = sample_contexts(n, seed=seed * 1_000_003 + k)
        for name, (lhs, rhs) in bound_checks(ctx).items():
            bad = lhs > rhs * (1.0 + rel_slack)
            report["violations"][name] = report["violations"].get(name, 0) + int(np.sum(bad))
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(rhs > 0, lhs / rhs, 0.0)
            report["max_ratio"][name] = max(report["max_ratio"].get(name, 0.0), float(np.max(ratio)))
            if np.any(bad) and name not in report["witness"]:
                i = int(np.argmax(bad))
                report["witness"][name] = {key: np.asarray(v[i]).tolist() for key, v in ctx.items()}
        done += n
        k += 1
    report["passed"] = all(v == 0 for v in report["violations"].values())
    return report


# ---------------------------------------------------------------------------
# Sphere average of the singular denominator
# ---------------------------------------------------------------------------

def sphere_average_closed_form(eta, delta: float) -> float:
    """Closed form of the integral over the sphere of (1 + omega . v(eta))^(-delta)."""
    eta = np.asarray(eta, float)
    q = float(np.linalg.norm(eta))
    if q == 0.0:
        return FOUR_PI
    g = math.sqrt(1.0 + q * q)
    v = q / g
    if delta == 1.0:
        return 2.0 * np.pi * (g / q) * (math.log1p(v) - math.log1p(-v))
    e = 1.0 - delta
    # (1 - v) = 1 / (g (g + q)) avoids cancellation at large momenta.
    one_minus = 1.0 / (g * (g + q))
    return 2.0 * np.pi * (g / q) * ((1.0 + v) ** e - one_minus ** e) / e


def aligned_rule(eta, n_theta: int = 400, n_phi: int = 4) -> SphereRule:
    """Product rule with its pole along ``eta``.

    The integrand depends only on the angle to ``eta``, so azimuthal nodes are
    cheap; polar nodes are Gauss-Legendre in the cosine.
    """
    eta = np.asarray(eta, float)
    return product_sphere(n_theta, n_phi, axis=eta)


def sphere_weight_average(eta, delta: float, rule: SphereRule | None = None) -> dict:
    """Quadrature and closed form of the sphere average, plus its growth regime."""
    eta = np.asarray(eta, float)
    q = float(np.linalg.norm(eta))
    if q <= 0.0:
        raise ValueError("need |eta| > 0")
    rule = rule or aligned_rule(eta)
    den = 1.0 + rule.points @ rel_velocity(eta)
    quad = float(np.sum(rule.weights * den ** (-delta)))
    closed = sphere_average_closed_form(eta, delta)
    g = math.sqrt(1.0 + q * q)
    if delta > 1:
        regime, scale = "power", g ** (2 * (delta - 1))
    elif delta == 1:
        regime, scale = "log", math.log(1.0 + g)
    else:
        regime, scale = "bounded", 1.0
    return {"quadrature": quad, "closed_form": closed,
            "relative_error": abs(quad - closed) / abs(closed),
            "regime": regime, "regime_scale": scale, "ratio_to_scale": closed / scale,
            "rule": rule.name}


def default_sphere_rule() -> SphereRule:
    return lebedev(7)
