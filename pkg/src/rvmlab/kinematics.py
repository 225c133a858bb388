"""Relativistic single-particle kinematics and characteristic tracing.

Units set the speed of light and the particle charge-to-mass ratio to one.
Momenta are dimensionless; ``lorentz_factor(xi) = sqrt(1 + |xi|^2)`` and the
velocity is ``xi / lorentz_factor(xi)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .providers import FieldProvider


def lorentz_factor(xi) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(1.0 + np.sum(xi * xi, axis=-1))


def rel_velocity(xi) -> np.ndarray:
    """Relativistic velocity, always strictly subluminal."""
    xi = np.asarray(xi, dtype=float)
    return xi / lorentz_factor(xi)[..., None]


def lorentz_force(E, B, xi) -> np.ndarray:
    """Force on a unit charge: ``E + v x B``."""
    return np.asarray(E, float) + np.cross(rel_velocity(xi), np.asarray(B, float))


@dataclass(frozen=True)
class PhasePoint:
    x: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(3)
        xi = np.asarray(self.xi, dtype=float).reshape(3)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(xi))):
            raise ValueError("phase point components must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "xi", xi)


@dataclass(frozen=True)
class IntegratorSpec:
    method: str = "rk4"  # "rk4" or "boris"
    step: float = 1e-2
    tolerance: float = 1e-8

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.method not in ("rk4", "boris"):
            raise ValueError(f"unknown integrator {self.method!r}")

    @property
    def order(self) -> int:
        return 4 if self.method == "rk4" else 2


@dataclass(frozen=True)
class Trajectory:
    """Time-sampled characteristic with enough data for Hermite interpolation.

    ``work`` is the running integral of ``v(Xi) . E(s, X(s))``, integrated
    alongside the characteristic itself.
    """

    t: np.ndarray
    X: np.ndarray
    Xi: np.ndarray
    dX: np.ndarray
    dXi: np.ndarray
    work: np.ndarray
    spec: IntegratorSpec = field(default_factory=IntegratorSpec)

    def __post_init__(self):
        for name in ("t", "X", "Xi", "dX", "dXi", "work"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        dt = np.diff(self.t)
        if not (np.all(dt > 0) or np.all(dt < 0)):
            raise ValueError("trajectory times must be strictly monotone")

    @property
    def seed(self) -> PhasePoint:
        return PhasePoint(self.X[0], self.Xi[0])

    def at(self, s) -> tuple[np.ndarray, np.ndarray]:
        """Cubic Hermite interpolation of (X, Xi) at times ``s``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        t = self.t
        flip = t[-1] < t[0]
        if flip:
            t = t[::-1]
            X, Xi, dX, dXi = self.X[::-1], self.Xi[::-1], self.dX[::-1], self.dXi[::-1]
        else:
            X, Xi, dX, dXi = self.X, self.Xi, self.dX, self.dXi
        eps = 1e-12 * max(1.0, abs(t[-1] - t[0]))
        if np.any(s < t[0] - eps) or np.any(s > t[-1] + eps):
            raise ValueError("interpolation time outside trajectory range")
        k = np.clip(np.searchsorted(t, s, side="right") - 1, 0, len(t) - 2)
        h = t[k + 1] - t[k]
        u = ((s - t[k]) / h)[:, None]
        h = h[:, None]
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        xs = h00 * X[k] + h10 * h * dX[k] + h01 * X[k + 1] + h11 * h * dX[k + 1]
        ps = h00 * Xi[k] + h10 * h * dXi[k] + h01 * Xi[k + 1] + h11 * h * dXi[k + 1]
        return xs, ps

    def to_csv(self, path) -> None:
        D = lorentz_factor(self.Xi) - lorentz_factor(self.Xi[0])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "X1", "X2", "X3", "Xi1", "Xi2", "Xi3", "D"])
            for i in range(len(self.t)):
                w.writerow([repr(float(v)) for v in
                            (self.t[i], *self.X[i], *self.Xi[i], D[i])])


def _rhs(fields: FieldProvider, t: float, x: np.ndarray, xi: np.ndarray):
    E, B = fields.evaluate(t, x)
    v = rel_velocity(xi)
    return v, E + np.cross(v, B), np.sum(v * E, axis=-1)


def _n_steps(t0: float, t1: float, step: float) -> int:
    return max(1, int(math.ceil(abs(t1 - t0) / step - 1e-9)))


def _rk4_step(fields, t, h, x, xi):
    k1x, k1p, k1w = _rhs(fields, t, x, xi)
    k2x, k2p, k2w = _rhs(fields, t + h / 2, x + h / 2 * k1x, xi + h / 2 * k1p)
    k3x, k3p, k3w = _rhs(fields, t + h / 2, x + h / 2 * k2x, xi + h / 2 * k2p)
    k4x, k4p, k4w = _rhs(fields, t + h, x + h * k3x, xi + h * k3p)
    return (x + h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x),
            xi + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p),
            h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w))


def _boris_step(fields, t, h, x, xi):
    """Drift-kick-drift with a relativistic Boris rotation for the kick."""
    xm = x + 0.5 * h * rel_velocity(xi)
    E, B = fields.evaluate(t + 0.5 * h, xm)
    um = xi + 0.5 * h * E
    tv = 0.5 * h * B / lorentz_factor(um)[..., None]
    up = um + np.cross(um, tv)
    sv = 2.0 * tv / (1.0 + np.sum(tv * tv, axis=-1))[..., None]
    up = um + np.cross(up, sv)
    xi_new = up + 0.5 * h * E
    x_new = xm + 0.5 * h * rel_velocity(xi_new)
    dw = lorentz_factor(xi_new) - lorentz_factor(xi)
    return x_new, xi_new, dw


def advance(fields: FieldProvider, x, xi, t0: float, t1: float,
            spec: IntegratorSpec = IntegratorSpec()):
    """Push a batch of phase points from ``t0`` to ``t1`` (either direction)."""
    x = np.array(np.atleast_2d(x), dtype=float)
    xi = np.array(np.atleast_2d(xi), dtype=float)
    if t1 == t0:
        return x, xi
    n = _n_steps(t0, t1, spec.step)
    h = (t1 - t0) / n
    stepper = _rk4_step if spec.method == "rk4" else _boris_step
    for i in range(n):
        x, xi, _ = stepper(fields, t0 + i * h, h, x, xi)
    return x, xi


def integrate_characteristic(seed: PhasePoint, fields: FieldProvider, t0: float,
                             t1: float, spec: IntegratorSpec = IntegratorSpec()) -> Trajectory:
    """Trace ``dX/dt = v(Xi)``, ``dXi/dt = E + v x B`` from ``seed`` at ``t0``."""
    n = _n_steps(t0, t1, spec.step)
    h = (t1 - t0) / n
    stepper = _rk4_step if spec.method == "rk4" else _boris_step
    ts = t0 + h * np.arange(n + 1)
    ts[-1] = t1
    X = np.empty((n + 1, 3))
    P = np.empty((n + 1, 3))
    W = np.zeros(n + 1)
    x = seed.x[None, :].copy()
    xi = seed.xi[None, :].copy()
    X[0], P[0] = x[0], xi[0]
    for i in range(n):
        x, xi, dw = stepper(fields, ts[i], h, x, xi)
        X[i + 1], P[i + 1] = x[0], xi[0]
        W[i + 1] = W[i] + float(np.ravel(dw)[0])
    dX = np.empty_like(X)
    dP = np.empty_like(P)
    for i in range(n + 1):
        vx, fp, _ = _rhs(fields, ts[i], X[i:i + 1], P[i:i + 1])
        dX[i], dP[i] = vx[0], fp[0]
    return Trajectory(ts, X, P, dX, dP, W, spec)


@dataclass(frozen=True)
class IncrementSeries:
    t: np.ndarray
    direct: np.ndarray  # <Xi(t)> - <eta>
    work: np.ndarray  # time integral of v(Xi) . E along the path

    @property
    def mismatch(self) -> float:
        return float(np.max(np.abs(self.direct - self.work)))


def momentum_increment_ode(traj: Trajectory) -> IncrementSeries:
    """Momentum increment along a trajectory, computed two ways."""
    if len(traj.t) == 0:
        raise ValueError("empty trajectory")
    g = lorentz_factor(traj.Xi)
    return IncrementSeries(traj.t.copy(), g - g[0], traj.work.copy())


def backward_evaluate_f(f0: Callable[[np.ndarray, np.ndarray], np.ndarray],
                        fields: FieldProvider, t: float, x, xi,
                        spec: IntegratorSpec = IntegratorSpec(step=0.05)) -> np.ndarray:
    """Evaluate the Vlasov solution at time ``t`` by tracing back to time 0."""
    x = np.atleast_2d(np.asarray(x, float))
    xi = np.atleast_2d(np.asarray(xi, float))
    xb, pb = advance(fields, x, xi, t, 0.0, spec)
    return np.asarray(f0(xb, pb), dtype=float)
