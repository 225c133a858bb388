"""Quadrature engine for the four-term momentum-increment representation.

For a characteristic ``(X, Xi)`` traced from a seed at time 0, the energy
gained up to time ``t`` splits into an initial-data term ``D0``, a
free-wave term ``Dh``, a force-free source term ``Dl`` and a force term
``Dn = Dne + Dnb``. Each term comes with its absolute-value variant (weights,
fields and densities replaced by their magnitudes) and an error estimate:
the difference to a run on a coarser rule plus a rounding floor.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from .kinematics import Trajectory, lorentz_factor, rel_velocity
from .quadrature import LEBEDEV_POINTS, BallRule, ball_rule, gauss_legendre, lebedev_by_points
from .weights import weight_W0, weight_Wl, weight_Wn

EPS = np.finfo(float).eps
_POINT_COUNTS = tuple(sorted(LEBEDEV_POINTS.values()))


class NonSmoothProvider(ValueError):
    """The provider does not declare smooth data; the formula is not applied."""


class TruncationError(ValueError):
    """The momentum rule does not cover the declared support."""


class BlowUpError(ValueError):
    def __init__(self, blow_up_time: float, t: float):
        super().__init__(f"quartic envelope blows up at t = {blow_up_time!r} (requested t = {t!r})")
        self.blow_up_time = blow_up_time
        self.t = t


# ---------------------------------------------------------------------------
# Provider contract
# ---------------------------------------------------------------------------

@runtime_checkable
class SolutionProvider(Protocol):
    """Everything the engine consumes.

    ``fields`` returns the total (E, B) entering the Lorentz force, ``Eh`` the
    free-wave field, ``P(t)`` a radius containing the momentum support of
    ``f(t)`` and ``Q(t)`` either ``None`` or ``(center, radius)`` containing
    its spatial support.
    """

    smooth: bool
    trajectory: Trajectory

    def f0(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray: ...
    def f(self, t: float, x: np.ndarray, xi: np.ndarray) -> np.ndarray: ...
    def fields(self, t: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...
    def Eh(self, t: float, x: np.ndarray) -> np.ndarray: ...
    def P(self, t: float) -> float: ...
    def Q(self, t: float): ...


def _zero_vec(x):
    return np.zeros((np.atleast_2d(x).shape[0], 3))


@dataclass
class AnalyticSolution:
    """Provider assembled from closures."""

    trajectory: Trajectory
    f0_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    f_fn: Callable[[float, np.ndarray, np.ndarray], np.ndarray] | None = None
    E_fn: Callable[[float, np.ndarray], np.ndarray] | None = None
    B_fn: Callable[[float, np.ndarray], np.ndarray] | None = None
    Eh_fn: Callable[[float, np.ndarray], np.ndarray] | None = None
    P_fn: Callable[[float], float] | float = 1.0
    Q_fn: Callable[[float], object] | None = None
    smooth: bool = True

    def f0(self, x, xi):
        return np.asarray(self.f0_fn(x, xi), float)

    def f(self, t, x, xi):
        # Without an evolution closure the data are taken as stationary.
        if self.f_fn is None:
            return self.f0(x, xi)
        return np.asarray(self.f_fn(t, x, xi), float)

    def fields(self, t, x):
        E = _zero_vec(x) if self.E_fn is None else np.asarray(self.E_fn(t, x), float)
        B = _zero_vec(x) if self.B_fn is None else np.asarray(self.B_fn(t, x), float)
        return E, B

    def Eh(self, t, x):
        return _zero_vec(x) if self.Eh_fn is None else np.asarray(self.Eh_fn(t, x), float)

    def P(self, t):
        return float(self.P_fn(t)) if callable(self.P_fn) else float(self.P_fn)

    def Q(self, t):
        return None if self.Q_fn is None else self.Q_fn(t)


class MemoizedDensity:
    """Cache of density values keyed on quantized ``(t, x, xi)``.

    With ``pitch=None`` keys are the exact coordinates, so only repeated
    nodes are reused. A positive pitch trades accuracy for reuse.
    """

    def __init__(self, f: Callable[[float, np.ndarray, np.ndarray], np.ndarray], pitch: float | None = None):
        self._f = f
        self.pitch = pitch
        self._cache: dict = {}
        self.hits = 0
        self.misses = 0

    def _keys(self, t, x, xi):
        pts = np.concatenate([np.full((x.shape[0], 1), t), x, xi], axis=1)
        if self.pitch:
            pts = np.round(pts / self.pitch).astype(np.int64)
        return [row.tobytes() for row in pts]

    def __call__(self, t, x, xi):
        x = np.atleast_2d(np.asarray(x, float))
        xi = np.atleast_2d(np.asarray(xi, float))
        keys = self._keys(t, x, xi)
        out = np.empty(len(keys))
        todo = []
        for i, k in enumerate(keys):
            v = self._cache.get(k)
            if v is None:
                todo.append(i)
            else:
                out[i] = v
        self.hits += len(keys) - len(todo)
        self.misses += len(todo)
        if todo:
            idx = np.asarray(todo)
            vals = np.asarray(self._f(t, x[idx], xi[idx]), float)
            out[idx] = vals
            for i, v in zip(todo, vals):
                self._cache[keys[i]] = float(v)
        return out


# ---------------------------------------------------------------------------
# Quadrature settings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts for the nested rules.

    ``time_nodes`` Gauss-Legendre nodes in r and (nested) in s,
    ``sphere_points`` the Lebedev point count, ``xi_nodes`` the radial,
    polar and azimuthal counts of the tensor rule on the momentum ball. In
    ``montecarlo`` mode the momentum rule is a stratified sample of
    ``mc_samples`` antithetic pairs.
    """

    time_nodes: int = 16
    sphere_points: int = 26
    xi_nodes: tuple[int, int, int] = (8, 8, 8)
    xi_mode: str = "tensor"
    mc_samples: int = 4096
    seed: int = 0
    xi_radius: float | None = None

    def __post_init__(self):
        if self.time_nodes < 2:
            raise ValueError("time_nodes must be >= 2")
        if self.sphere_points not in _POINT_COUNTS:
            raise ValueError(f"no Lebedev rule with {self.sphere_points} points")
        if len(self.xi_nodes) != 3 or min(self.xi_nodes) < 2 or self.xi_nodes[2] % 2:
            raise ValueError("xi_nodes needs three counts >= 2 with an even azimuthal count")
        if self.xi_mode not in ("tensor", "montecarlo"):
            raise ValueError("xi_mode must be 'tensor' or 'montecarlo'")
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be >= 1")

    def coarse(self) -> "QuadratureSpec":
        """Rule used for the error estimate: about half the nodes per axis."""
        smaller = [p for p in _POINT_COUNTS if p <= self.sphere_points // 2]
        nr, nt, nphi = self.xi_nodes
        return replace(self, time_nodes=max(2, self.time_nodes // 2),
                       sphere_points=max(smaller) if smaller else _POINT_COUNTS[0],
                       xi_nodes=(max(2, nr // 2), max(2, nt // 2), max(2, 2 * (nphi // 4))),
                       mc_samples=max(1, self.mc_samples // 4), seed=self.seed + 1)

    def refined(self) -> "QuadratureSpec":
        """Twice the time nodes and about twice the sphere points."""
        bigger = [p for p in _POINT_COUNTS if p >= 2 * self.sphere_points]
        return replace(self, time_nodes=2 * self.time_nodes,
                       sphere_points=min(bigger) if bigger else self.sphere_points)

    def sphere(self):
        return lebedev_by_points(self.sphere_points)

    def xi_rule(self, radius: float) -> BallRule:
        if self.xi_radius is not None:
            radius = self.xi_radius
        if self.xi_mode == "tensor":
            return ball_rule(radius, *self.xi_nodes)
        return stratified_ball(radius, self.mc_samples, self.seed)

    def node_counts(self) -> dict:
        d = asdict(self)
        d["xi_nodes"] = list(self.xi_nodes)
        return d


def stratified_ball(radius: float, pairs: int, seed: int = 0) -> BallRule:
    """Stratified Monte Carlo rule on a ball, closed under ``xi -> -xi``.

    Strata are equal-volume cells in (r^3, cos theta, phi); one uniform point
    per cell plus its antipode.
    """
    rng = np.random.default_rng(seed)
    m = max(1, int(round(pairs ** (1.0 / 3.0))))
    n = m ** 3
    idx = np.stack(np.meshgrid(np.arange(m), np.arange(m), np.arange(m), indexing="ij"), -1).reshape(-1, 3)
    u = (idx + rng.random((n, 3))) / m
    r = radius * np.cbrt(u[:, 0])
    ct = 2.0 * u[:, 1] - 1.0
    st = np.sqrt(1.0 - ct * ct)
    ph = 2.0 * np.pi * u[:, 2]
    pts = r[:, None] * np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
    pts = np.concatenate([pts, -pts])
    vol = 4.0 / 3.0 * np.pi * radius ** 3
    return BallRule(pts, np.full(2 * n, vol / (2 * n)), float(radius))


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass
class TermValue:
    value: float
    absolute: float
    error: float

    def as_dict(self):
        return {"value": self.value, "absolute": self.absolute, "error": self.error}


@dataclass
class IncrementBreakdown:
    t: float
    D0: float
    Dh: float
    Dl: float
    Dne: float
    Dnb: float
    Da0: float
    Dah: float
    Dal: float
    Dane: float
    Danb: float
    errors: dict
    spec: QuadratureSpec
    wall_time: float = 0.0

    TERMS = ("D0", "Dh", "Dl", "Dne", "Dnb")

    @property
    def total(self) -> float:
        return self.D0 + self.Dh + self.Dl + self.Dne + self.Dnb

    @property
    def absolute_total(self) -> float:
        return self.Da0 + self.Dah + self.Dal + self.Dane + self.Danb

    @property
    def total_error(self) -> float:
        return float(sum(self.errors[k] for k in self.TERMS))

    def absolute(self, term: str) -> float:
        return getattr(self, "Da" + term[1:])

    def as_dict(self) -> dict:
        terms = {k: {"value": getattr(self, k), "absolute": self.absolute(k), "error": self.errors[k]}
                 for k in self.TERMS}
        return {"t": self.t, "terms": terms, "total": self.total, "absolute_total": self.absolute_total,
                "total_error": self.total_error, "node_counts": self.spec.node_counts(),
                "wall_time": self.wall_time}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.as_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


# ---------------------------------------------------------------------------
# Term evaluation
# ---------------------------------------------------------------------------

def _require_smooth(provider):
    if not getattr(provider, "smooth", False):
        raise NonSmoothProvider("provider does not declare smooth data")


def _check_radius(spec: QuadratureSpec, support: float):
    if spec.xi_radius is not None and spec.xi_radius < support * (1.0 - 1e-12):
        raise TruncationError(f"momentum rule radius {spec.xi_radius} below declared support {support}")


def _inside(points: np.ndarray, q) -> np.ndarray:
    if q is None:
        return np.ones(points.shape[:-1], bool)
    center, radius = q
    d = points - np.asarray(center, float)
    return np.sum(d * d, axis=-1) <= radius * radius


def _floor(count: int, absolute: float) -> float:
    # Worst-case accumulated rounding of a sum of ``count`` terms.
    return count * EPS * absolute


def _d0_raw(provider, t: float, spec: QuadratureSpec):
    traj = provider.trajectory
    s, ws = gauss_legendre(spec.time_nodes, 0.0, t)
    X, Xi = traj.at(s)
    nu = rel_velocity(Xi)
    sph = spec.sphere()
    P0 = provider.P(0.0)
    _check_radius(spec, P0)
    ball = spec.xi_rule(P0)
    y = X[:, None, :] + s[:, None, None] * sph.points[None, :, :]  # (S, M, 3)
    keep = _inside(y, provider.Q(0.0))
    K = ball.size
    fv = np.zeros(y.shape[:2] + (K,))
    if np.any(keep):
        yy = y[keep]
        xs = np.repeat(yy, K, axis=0)
        ps = np.tile(ball.points, (yy.shape[0], 1))
        fv[keep] = provider.f0(xs, ps).reshape(-1, K)
    w0 = weight_W0(s[:, None, None], sph.points[None, :, None, :], ball.points[None, None, :, :],
                   nu[:, None, None, :])
    meas = ws[:, None, None] * sph.weights[None, :, None] * ball.weights[None, None, :]
    val = float(np.sum(meas * w0 * fv))
    ab = float(np.sum(meas * np.abs(w0) * np.abs(fv)))
    return val, ab, meas.size


def _dh_raw(provider, t: float, spec: QuadratureSpec):
    traj = provider.trajectory
    s, ws = gauss_legendre(spec.time_nodes, 0.0, t)
    X, Xi = traj.at(s)
    nu = rel_velocity(Xi)
    eh = np.stack([np.asarray(provider.Eh(float(si), X[i:i + 1]), float).reshape(3) for i, si in enumerate(s)])
    val = float(np.sum(ws * np.sum(nu * eh, axis=1)))
    ab = float(np.sum(ws * np.linalg.norm(nu, axis=1) * np.linalg.norm(eh, axis=1)))
    return val, ab, s.size


def _source_raw(provider, t: float, spec: QuadratureSpec, force=None, density=None):
    """Dl, Dne and Dnb in one sweep over the shared nodes.

    ``force`` and ``density`` substitute the provider's fields and density,
    which is how the bilinear cross terms are formed.
    """
    traj = provider.trajectory
    force = force or provider.fields
    density = density or provider.f
    sph = spec.sphere()
    r_nodes, wr = gauss_legendre(spec.time_nodes, 0.0, t)
    acc = dict.fromkeys(("Dl", "Dne", "Dnb", "Dal", "Dane", "Danb"), 0.0)
    count = 0
    for r, w_r in zip(r_nodes, wr):
        s, ws = gauss_legendre(spec.time_nodes, r, t)
        X, Xi = traj.at(s)
        nu_s = rel_velocity(Xi)
        P = provider.P(float(r))
        _check_radius(spec, P)
        ball = spec.xi_rule(P)
        K = ball.size
        lag = s - r
        y = X[:, None, :] + lag[:, None, None] * sph.points[None, :, :]
        keep = _inside(y, provider.Q(float(r)))
        count += y.shape[0] * y.shape[1] * K
        if not np.any(keep):
            continue
        yy = y[keep]  # (Nk, 3)
        sel = np.nonzero(keep)
        xs = np.repeat(yy, K, axis=0)
        ps = np.tile(ball.points, (yy.shape[0], 1))
        fv = np.asarray(density(float(r), xs, ps), float).reshape(-1, K)
        E, B = force(float(r), yy)
        E = np.asarray(E, float).reshape(-1, 3)
        B = np.asarray(B, float).reshape(-1, 3)
        om = sph.points[sel[1]][:, None, :]
        nu_k = nu_s[sel[0]][:, None, :]
        s_k = s[sel[0]][:, None]
        xi = ball.points[None, :, :]
        wl = weight_Wl(s_k, om, xi, nu_k)  # (Nk, K)
        wn = weight_Wn(s_k, float(r), om, xi, nu_k)  # (Nk, K, 3)
        wnb = np.cross(wn, rel_velocity(xi))
        meas = (w_r * ws[sel[0]] * sph.weights[sel[1]])[:, None] * ball.weights[None, :]
        mf = meas * fv
        amf = meas * np.abs(fv)
        acc["Dl"] += float(np.sum(mf * wl))
        acc["Dal"] += float(np.sum(amf * np.abs(wl)))
        acc["Dne"] += float(np.sum(mf * np.einsum("nkc,nc->nk", wn, E)))
        acc["Dnb"] += float(np.sum(mf * np.einsum("nkc,nc->nk", wnb, B)))
        acc["Dane"] += float(np.sum(amf * np.linalg.norm(wn, axis=-1) * np.linalg.norm(E, axis=-1)[:, None]))
        acc["Danb"] += float(np.sum(amf * np.linalg.norm(wnb, axis=-1) * np.linalg.norm(B, axis=-1)[:, None]))
    return acc, count


def _with_error(fine, coarse, abs_fine, count) -> TermValue:
    return TermValue(fine, abs_fine, abs(fine - coarse) + _floor(count, abs_fine))


def compute_D0(provider, t: float, spec: QuadratureSpec = QuadratureSpec()) -> TermValue:
    """Initial-data term."""
    _require_smooth(provider)
    if t == 0:
        return TermValue(0.0, 0.0, 0.0)
    v, a, n = _d0_raw(provider, t, spec)
    vc, _, _ = _d0_raw(provider, t, spec.coarse())
    return _with_error(v, vc, a, n)


def compute_Dh(provider, t: float, spec: QuadratureSpec = QuadratureSpec()) -> TermValue:
    """Free-wave term, Gauss-Legendre in time along the trajectory."""
    _require_smooth(provider)
    if t == 0:
        return TermValue(0.0, 0.0, 0.0)
    v, a, n = _dh_raw(provider, t, spec)
    vc, _, _ = _dh_raw(provider, t, spec.coarse())
    return _with_error(v, vc, a, n)


def _source_terms(provider, t, spec, force=None, density=None) -> dict[str, TermValue]:
    _require_smooth(provider)
    if t == 0:
        return {k: TermValue(0.0, 0.0, 0.0) for k in ("Dl", "Dne", "Dnb")}
    fine, n = _source_raw(provider, t, spec, force, density)
    coarse, _ = _source_raw(provider, t, spec.coarse(), force, density)
    return {k: _with_error(fine[k], coarse[k], fine["Da" + k[1:]], n) for k in ("Dl", "Dne", "Dnb")}


def compute_Dl(provider, t: float, spec: QuadratureSpec = QuadratureSpec()) -> TermValue:
    """Force-free source term."""
    return _source_terms(provider, t, spec)["Dl"]


def compute_Dn(provider, t: float, spec: QuadratureSpec = QuadratureSpec()) -> tuple[TermValue, TermValue]:
    """Electric and magnetic parts of the force term."""
    terms = _source_terms(provider, t, spec)
    return terms["Dne"], terms["Dnb"]


def compute_breakdown(provider, t: float, spec: QuadratureSpec = QuadratureSpec()) -> IncrementBreakdown:
    start = time.perf_counter()
    d0 = compute_D0(provider, t, spec)
    dh = compute_Dh(provider, t, spec)
    src = _source_terms(provider, t, spec)
    terms = {"D0": d0, "Dh": dh, **src}
    return IncrementBreakdown(
        t=float(t), D0=d0.value, Dh=dh.value, Dl=src["Dl"].value, Dne=src["Dne"].value, Dnb=src["Dnb"].value,
        Da0=d0.absolute, Dah=dh.absolute, Dal=src["Dl"].absolute, Dane=src["Dne"].absolute,
        Danb=src["Dnb"].absolute, errors={k: v.error for k, v in terms.items()}, spec=spec,
        wall_time=time.perf_counter() - start)


def ode_increment(trajectory: Trajectory, t: float) -> float:
    """Energy gained along the traced characteristic up to time ``t``."""
    _, xi = trajectory.at(np.array([t]))
    return float(lorentz_factor(xi[0]) - lorentz_factor(trajectory.Xi[0]))


def compare_increment(provider, t: float, spec: QuadratureSpec = QuadratureSpec(),
                      integrator_tolerance: float | None = None) -> dict:
    """Breakdown against the increment read off the characteristic itself."""
    bd = compute_breakdown(provider, t, spec)
    d_ode = ode_increment(provider.trajectory, t)
    tol = provider.trajectory.spec.tolerance if integrator_tolerance is None else integrator_tolerance
    residual = abs(d_ode - bd.total)
    return {"t": float(t), "D_ode": d_ode, "breakdown": bd, "total": bd.total, "residual": residual,
            "budget": {**bd.errors, "integrator": tol, "combined": bd.total_error + tol},
            "within_budget": residual <= bd.total_error + tol}


def cross_term_split(approx, perturbation, t: float, spec: QuadratureSpec = QuadratureSpec()) -> dict:
    """Bilinear blocks of the force term for a split ``f = f_a + f_p``.

    Both providers must share the trajectory and support bounds of the full
    solution. Returns the four (force, density) blocks; by bilinearity they
    sum to the force term of the full solution.
    """
    blocks = {}
    for fname, fsrc in (("a", approx), ("p", perturbation)):
        for dname, dsrc in (("a", approx), ("p", perturbation)):
            terms = _source_terms(approx, t, spec, force=fsrc.fields, density=dsrc.f)
            blocks[f"F{fname}_f{dname}"] = {"Dne": terms["Dne"], "Dnb": terms["Dnb"]}
    return blocks


def support_bound_from_increment(P0: float, breakdown: IncrementBreakdown) -> float:
    """Upper envelope for the momentum support radius (in Lorentz-factor units)."""
    return 1.0 + float(P0) + breakdown.absolute_total


def quartic_blow_up_time(I0: float, C: float) -> float:
    if I0 <= 0 or C <= 0:
        return math.inf
    return 1.0 / (3.0 * C * I0 ** 3)


def bihari_envelope(I0: float, beta: float, t: float, mode: str = "exponential", C: float | None = None) -> float:
    """``2 I0 exp(beta t)``, or in quartic mode the solution of ``y' = C y^4, y(0) = I0``."""
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if mode == "exponential":
        return 2.0 * I0 * math.exp(beta * t)
    if mode != "quartic":
        raise ValueError(f"unknown mode {mode!r}")
    if C is None:
        raise ValueError("quartic mode needs C")
    tb = quartic_blow_up_time(I0, C)
    if t >= tb:
        raise BlowUpError(tb, t)
    return I0 / (1.0 - 3.0 * C * I0 ** 3 * t) ** (1.0 / 3.0)


def quartic_envelope_numeric(I0: float, C: float, t: float, steps: int = 4096) -> float:
    """RK4 integration of ``y' = C y^4``; refuses to cross the blow-up time."""
    tb = quartic_blow_up_time(I0, C)
    if t >= tb:
        raise BlowUpError(tb, t)
    h = t / steps
    y = float(I0)
    rhs = lambda v: C * v ** 4  # noqa: E731
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def fit_exponential_envelope(times, values) -> tuple[float, float]:
    """Smallest ``(I0, beta)`` with ``2 I0 exp(beta t)`` above the samples.

    ``I0`` is half the first sample; ``beta`` the largest growth rate needed to
    cover each later sample.
    """
    times = np.asarray(times, float)
    values = np.asarray(values, float)
    I0 = 0.5 * float(values[0])
    if I0 <= 0:
        raise ValueError("first sample must be positive")
    rates = [math.log(v / (2 * I0)) / tt for tt, v in zip(times, values) if tt > 0 and v > 2 * I0]
    return I0, max([0.0] + rates)
