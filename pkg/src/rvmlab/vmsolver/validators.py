"""Numerical checks that scenario data belong to the admissible classes.

``validate_well_prepared`` tests an approximate solution ``(f_a, E_a, B_a)``
given as closures against its declared constants; ``validate_compatible``
tests a family of initial perturbations ``eps -> f0_eps``. Both sample on
tensor grids and report each clause separately, with a witness point for
every violation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from ..fields import InitialEM, kirchhoff_Eh
from ..kinematics import rel_velocity
from ..quadrature import ball_rule, composite_gauss_legendre, gauss_legendre, lebedev_by_points

# Clause names of the well-prepared and compatible definitions.
WELL_PREPARED_CLAUSES = ("supppourUepsa", "Linftyteforuepsaf", "LinftyteforuepsaE", "LipesteforuepsaB",
                         "Lipesteforuepsaf", "Linftyteforuepsah", "remainderupesa1", "remainderupesa2",
                         "compatibility conditionforUepsa2")
COMPATIBLE_CLAUSES = ("minimalradiusforf", "Lebesgue bounds", "absorptioforsm", "compatibility conditions")
CLAUSE_DESCRIPTIONS = {
    "supppourUepsa": "momentum support of f_a within P_a",
    "Linftyteforuepsaf": "sup of f_a within S_a",
    "LinftyteforuepsaE": "sup of E_a within S_a",
    "LipesteforuepsaB": "Lipschitz bound on B_a",
    "Lipesteforuepsaf": "Lipschitz bound on f_a",
    "Linftyteforuepsah": "homogeneous field within S_h",
    "remainderupesa1": "pointwise remainder within S_r",
    "remainderupesa2": "L2 remainder within eps N_r",
    "compatibility conditionforUepsa2": "Gauss law and div B of the approximation",
    "minimalradiusforf": "momentum support within P0",
    "Lebesgue bounds": "sup within S0",
    "absorptioforsm": "L2 norm within N0 eps",
    "compatibility conditions": "zero momentum marginal",
}


@dataclass
class ClauseResult:
    name: str
    passed: bool
    value: float
    bound: float
    witness: dict | None = None
    eps: float | None = None
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "description": CLAUSE_DESCRIPTIONS.get(self.name, ""), "passed": bool(self.passed), "value": float(self.value),
                "bound": float(self.bound), "witness": self.witness, "eps": self.eps, "detail": self.detail}


@dataclass
class ValidationReport:
    kind: str
    clauses: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def failed(self) -> list[str]:
        return sorted({c.name for c in self.clauses if not c.passed})

    def clause(self, name: str, eps: float | None = None) -> ClauseResult:
        for c in self.clauses:
            if c.name == name and (eps is None or c.eps == eps):
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"kind": self.kind, "passed": self.passed, "failed": self.failed(),
                "clauses": [c.as_dict() for c in self.clauses]}


def _witness(**arrays) -> dict:
    return {k: np.asarray(v, float).tolist() for k, v in arrays.items()}


@dataclass(frozen=True)
class SamplingBox:
    """Spatial box and per-axis counts used by the validators."""

    lo: tuple[float, float, float] = (-2.0, -2.0, -2.0)
    hi: tuple[float, float, float] = (2.0, 2.0, 2.0)
    n_x: int = 6
    n_xi: int = 8
    n_t: int = 4
    xi_margin: float = 1.5

    def x_grid(self, n: int | None = None) -> np.ndarray:
        n = n or self.n_x
        axes = [np.linspace(a, b, n) for a, b in zip(self.lo, self.hi)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 3)

    def xi_grid(self, radius: float, n: int | None = None) -> np.ndarray:
        n = n or self.n_xi
        ax = np.linspace(-self.xi_margin * radius, self.xi_margin * radius, n)
        return np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1).reshape(-1, 3)

    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))


def _product(x: np.ndarray, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.repeat(x, xi.shape[0], axis=0), np.tile(xi, (x.shape[0], 1))


# ---------------------------------------------------------------------------
# Well-prepared approximate solutions
# ---------------------------------------------------------------------------

@dataclass
class ApproximateSolution:
    """Closures for ``(f_a, E_a, B_a)`` and the background density ``rho``.

    ``grad_f(t, x, xi)`` may return analytic ``(d_t f, grad_x f, grad_xi f)``;
    otherwise central differences of step ``fd_step`` are used.
    """

    f: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    E: Callable[[float, np.ndarray], np.ndarray]
    B: Callable[[float, np.ndarray], np.ndarray]
    rho: Callable[[np.ndarray], np.ndarray]
    eps: float
    grad_f: Callable | None = None
    fd_step: float = 1e-4


@dataclass(frozen=True)
class WellPreparedConstants:
    T_a: float
    P_a: float
    S_a: float
    H_a: float
    L_a: float
    S_h: float
    S_r: float
    N_r: float


def _fd_vec(fn, t, x, h, axis):
    e = np.zeros(3)
    e[axis] = h
    return (np.asarray(fn(t, x + e), float) - np.asarray(fn(t, x - e), float)) / (2 * h)


def _curl(fn, t, x, h):
    d = [_fd_vec(fn, t, x, h, j) for j in range(3)]  # d[j][:, i] = d_j F_i
    return np.stack([d[1][:, 2] - d[2][:, 1], d[2][:, 0] - d[0][:, 2], d[0][:, 1] - d[1][:, 0]], axis=1)


def _div(fn, t, x, h):
    return sum(_fd_vec(fn, t, x, h, j)[:, j] for j in range(3))


def _f_gradients(approx: ApproximateSolution, t, x, xi):
    """(d_t f, grad_x f, grad_xi f) at matched rows of ``x`` and ``xi``."""
    if approx.grad_f is not None:
        dt, gx, gxi = approx.grad_f(t, x, xi)
        return np.asarray(dt, float), np.asarray(gx, float), np.asarray(gxi, float)
    h = approx.fd_step
    f = approx.f
    dt = (np.asarray(f(t + h, x, xi)) - np.asarray(f(t - h, x, xi))) / (2 * h)
    gx = np.empty(x.shape)
    gxi = np.empty(xi.shape)
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        gx[:, j] = (np.asarray(f(t, x + e, xi)) - np.asarray(f(t, x - e, xi))) / (2 * h)
        gxi[:, j] = (np.asarray(f(t, x, xi + e)) - np.asarray(f(t, x, xi - e))) / (2 * h)
    return dt, gx, gxi


def _current(approx: ApproximateSolution, t, x, rule):
    """J = - integral of nu(xi) f d xi."""
    X, XI = _product(x, rule.points)
    fv = np.asarray(approx.f(t, X, XI), float).reshape(x.shape[0], rule.size)
    nu = rel_velocity(rule.points)
    return -np.einsum("nk,k,kc->nc", fv, rule.weights, nu)


def remainder(approx: ApproximateSolution, t: float, x: np.ndarray, xi: np.ndarray, xi_radius: float,
              n_ball: int = 12) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Remainder of the Vlasov-Maxwell operator applied to the approximate solution.

    Returns ``R_f`` at the ``(x, xi)`` pairs (matched rows), and ``R_E``,
    ``R_B`` at the distinct rows of ``x``.
    """
    x = np.atleast_2d(np.asarray(x, float))
    xi = np.atleast_2d(np.asarray(xi, float))
    h = approx.fd_step
    dt, gx, gxi = _f_gradients(approx, t, x, xi)
    E = np.asarray(approx.E(t, x), float)
    B = np.asarray(approx.B(t, x), float)
    nu = rel_velocity(xi)
    R_f = dt + np.sum(nu * gx, axis=1) + np.sum((E + np.cross(nu, B)) * gxi, axis=1)
    ux = np.unique(x, axis=0)
    rule = ball_rule(xi_radius, n_ball)
    dE = (np.asarray(approx.E(t + h, ux)) - np.asarray(approx.E(t - h, ux))) / (2 * h)
    dB = (np.asarray(approx.B(t + h, ux)) - np.asarray(approx.B(t - h, ux))) / (2 * h)
    R_E = dE - _curl(approx.B, t, ux, h) - _current(approx, t, ux, rule)
    R_B = dB + _curl(approx.E, t, ux, h)
    return R_f, R_E, R_B


def remainder_l2(approx: ApproximateSolution, T: float, box: SamplingBox, xi_radius: float,
                 n_t: int = 4, n_x: int = 4, n_ball: int = 6) -> float:
    """L2 norm of the remainder over [0, T] x box x ball by Gauss-Legendre tensor rules."""
    ts, wt = gauss_legendre(n_t, 0.0, T)
    axes = [gauss_legendre(n_x, a, b) for a, b in zip(box.lo, box.hi)]
    X = np.stack(np.meshgrid(*[a[0] for a in axes], indexing="ij"), -1).reshape(-1, 3)
    WX = np.einsum("i,j,k->ijk", *[a[1] for a in axes]).ravel()
    ball = ball_rule(xi_radius, n_ball)
    total = 0.0
    for t, w in zip(ts, wt):
        Xr, XIr = _product(X, ball.points)
        R_f, R_E, R_B = remainder(approx, float(t), Xr, XIr, xi_radius)
        # unique() sorts rows; the x grid is already sorted lexicographically.
        total += w * float(np.sum(np.repeat(WX, ball.size) * np.tile(ball.weights, X.shape[0]) * R_f ** 2))
        total += w * float(np.sum(WX * (np.sum(R_E ** 2, axis=1) + np.sum(R_B ** 2, axis=1))))
    return math.sqrt(total)


def remainder_l2_montecarlo(approx: ApproximateSolution, T: float, box: SamplingBox, xi_radius: float,
                            samples: int = 20000, seed: int = 0) -> tuple[float, float]:
    """Independent Monte Carlo estimate of the remainder L2 norm and its standard error."""
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(box.lo, float), np.asarray(box.hi, float)
    vol_x = box.volume()
    vol_b = 4.0 / 3.0 * math.pi * xi_radius ** 3
    t = rng.uniform(0.0, T, samples)
    x = lo + (hi - lo) * rng.random((samples, 3))
    u = rng.normal(size=(samples, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    xi = xi_radius * np.cbrt(rng.random(samples))[:, None] * u
    vals = np.empty(samples)
    for i in range(samples):
        R_f, R_E, R_B = remainder(approx, float(t[i]), x[i:i + 1], xi[i:i + 1], xi_radius)
        # The field part is spread over the ball so one sample covers both integrals.
        vals[i] = T * vol_x * (vol_b * R_f[0] ** 2 + float(np.sum(R_E ** 2) + np.sum(R_B ** 2)))
    mean = float(np.mean(vals))
    err = float(np.std(vals, ddof=1) / math.sqrt(samples))
    return math.sqrt(max(mean, 0.0)), err / (2.0 * math.sqrt(mean)) if mean > 0 else err


def homogeneous_field_norm(approx: ApproximateSolution, T: float, x: np.ndarray, n_t: int = 8,
                           sphere_points: int = 110) -> float:
    """Time integral of the sup over ``x`` of the free wave issued from (E_a(0), curl B_a(0))."""
    h = approx.fd_step
    E0 = lambda y: np.asarray(approx.E(0.0, y), float)  # noqa: E731
    B0 = lambda y: np.asarray(approx.B(0.0, y), float)  # noqa: E731
    grad = lambda y: np.stack([_fd_vec(approx.E, 0.0, y, h, j) for j in range(3)], axis=-1)  # noqa: E731
    init = InitialEM(E0, B0, grad, lambda y: _curl(approx.B, 0.0, y, h))
    rule = lebedev_by_points(sphere_points)
    ts, wt = gauss_legendre(n_t, 0.0, T)
    return float(sum(w * np.max(np.linalg.norm(kirchhoff_Eh(init, float(t), x, rule), axis=1))
                     for t, w in zip(ts, wt)))


def validate_well_prepared(approx: ApproximateSolution, const: WellPreparedConstants,
                           box: SamplingBox = SamplingBox(), tol: float = 1e-9,
                           constraint_tol: float = 1e-6, l2_nodes: int = 4, lipschitz_samples: int = 4000,
                           seed: int = 0) -> ValidationReport:
    """Check every clause of the well-prepared definition on sample grids."""
    rep = ValidationReport("well_prepared")
    eps = approx.eps
    ts = np.linspace(0.0, const.T_a, box.n_t)
    x = box.x_grid()
    xi = box.xi_grid(const.P_a)
    X, XI = _product(x, xi)
    outside = np.linalg.norm(XI, axis=1) > const.P_a

    f_sup, f_arg, out_sup, out_arg = 0.0, None, 0.0, None
    E_sup, E_arg, B_sup, B_arg = 0.0, None, 0.0, None
    for t in ts:
        fv = np.abs(np.asarray(approx.f(float(t), X, XI), float))
        k = int(np.argmax(fv))
        if fv[k] >= f_sup:
            f_sup, f_arg = float(fv[k]), _witness(t=t, x=X[k], xi=XI[k])
        if np.any(outside):
            ko = int(np.argmax(np.where(outside, fv, -1.0)))
            if fv[ko] >= out_sup:
                out_sup, out_arg = float(fv[ko]), _witness(t=t, x=X[ko], xi=XI[ko])
        ev = np.linalg.norm(np.asarray(approx.E(float(t), x), float), axis=1)
        bv = eps * np.linalg.norm(np.asarray(approx.B(float(t), x), float), axis=1)
        if ev.max() >= E_sup:
            E_sup, E_arg = float(ev.max()), _witness(t=t, x=x[int(np.argmax(ev))])
        if bv.max() >= B_sup:
            B_sup, B_arg = float(bv.max()), _witness(t=t, x=x[int(np.argmax(bv))])

    rep.clauses.append(ClauseResult("supppourUepsa", out_sup <= tol, out_sup, tol, out_arg if out_sup > tol else None,
                                    detail="sup |f_a| outside the momentum ball of radius P_a"))
    rep.clauses.append(ClauseResult("Linftyteforuepsaf", f_sup <= const.S_a * (1 + tol), f_sup, const.S_a,
                                    f_arg if f_sup > const.S_a * (1 + tol) else None))
    rep.clauses.append(ClauseResult("LinftyteforuepsaE", E_sup <= const.S_a * (1 + tol), E_sup, const.S_a,
                                    E_arg if E_sup > const.S_a * (1 + tol) else None))
    rep.clauses.append(ClauseResult("LipesteforuepsaB", B_sup <= const.H_a * (1 + tol), B_sup, const.H_a,
                                    B_arg if B_sup > const.H_a * (1 + tol) else None))

    # Lipschitz bound on random samples inside the support box.
    rng = np.random.default_rng(seed)
    n = lipschitz_samples
    lo, hi = np.asarray(box.lo, float), np.asarray(box.hi, float)
    xs = lo + (hi - lo) * rng.random((n, 3))
    xis = rng.uniform(-const.P_a, const.P_a, (n, 3))
    tl = float(rng.uniform(0.0, const.T_a))
    dt, gx, gxi = _f_gradients(approx, tl, xs, xis)
    gnorm = np.sqrt(dt ** 2 + np.sum(gx ** 2, axis=1) + np.sum(gxi ** 2, axis=1))
    k = int(np.argmax(gnorm))
    L = float(gnorm[k])
    rep.clauses.append(ClauseResult("Lipesteforuepsaf", L <= const.L_a * (1 + tol), L, const.L_a,
                                    _witness(t=tl, x=xs[k], xi=xis[k]) if L > const.L_a * (1 + tol) else None))

    Sh = homogeneous_field_norm(approx, const.T_a, box.x_grid(max(2, box.n_x // 2)))
    rep.clauses.append(ClauseResult("Linftyteforuepsah", Sh <= const.S_h * (1 + tol) + tol, Sh, const.S_h,
                                    detail="L1 in time of the sup of the free wave"))

    r_sup, r_arg = 0.0, None
    xr = box.x_grid(max(2, box.n_x // 2))
    xir = box.xi_grid(const.P_a, max(2, box.n_xi // 2))
    Xr, XIr = _product(xr, xir)
    for t in ts:
        R_f, R_E, R_B = remainder(approx, float(t), Xr, XIr, const.P_a)
        vals = (np.max(np.abs(R_f)), np.max(np.linalg.norm(R_E, axis=1)), np.max(np.linalg.norm(R_B, axis=1)))
        if max(vals) >= r_sup:
            r_sup = float(max(vals))
            r_arg = {"t": float(t), "component": ("f", "E", "B")[int(np.argmax(vals))]}
    rep.clauses.append(ClauseResult("remainderupesa1", r_sup <= const.S_r * (1 + tol) + tol, r_sup, const.S_r,
                                    r_arg if r_sup > const.S_r * (1 + tol) + tol else None))
    Rl2 = remainder_l2(approx, const.T_a, box, const.P_a, l2_nodes, l2_nodes)
    rep.clauses.append(ClauseResult("remainderupesa2", Rl2 <= const.N_r * eps * (1 + tol) + tol, Rl2,
                                    const.N_r * eps, detail="L2 norm of the remainder against N_r eps"))

    # Constraints at t = 0: Gauss law with the background density, and div B = 0.
    h = approx.fd_step
    rule = ball_rule(const.P_a, 16)
    Xc, XIc = _product(x, rule.points)
    dens = np.asarray(approx.f(0.0, Xc, XIc), float).reshape(x.shape[0], rule.size) @ rule.weights
    gauss = _div(approx.E, 0.0, x, h) - (dens - np.asarray(approx.rho(x), float))
    divb = _div(approx.B, 0.0, x, h)
    scale = max(float(np.max(np.abs(dens))), 1.0)
    g_err = float(np.max(np.abs(gauss))) / scale
    b_err = float(np.max(np.abs(divb)))
    bad_g = g_err > constraint_tol
    bad_b = b_err > constraint_tol
    wit = None
    if bad_g:
        wit = _witness(x=x[int(np.argmax(np.abs(gauss)))])
    elif bad_b:
        wit = _witness(x=x[int(np.argmax(np.abs(divb)))])
    rep.clauses.append(ClauseResult("compatibility conditionforUepsa2", not (bad_g or bad_b), max(g_err, b_err),
                                    constraint_tol, wit, detail=f"gauss={g_err:.3e} divB={b_err:.3e}"))
    return rep


def prototype_approximation(profile, eps: float, B_e=(0.0, 0.0, 1.0), fd_step: float = 1e-4) -> ApproximateSolution:
    """The stationary state ``(M(eps, <xi>), 0, B_e / eps)`` with its neutralizing density."""
    B = np.asarray(B_e, float) / eps
    from ..fields import rho_eps
    rho0, _ = rho_eps(profile, eps)

    def f(t, x, xi):
        return profile.of_momentum(eps, xi)

    def grad_f(t, x, xi):
        xi = np.asarray(xi, float)
        g = np.sqrt(1.0 + np.sum(xi * xi, axis=1))
        return np.zeros(xi.shape[0]), np.zeros(xi.shape), (profile.dr(eps, g) / g)[:, None] * xi

    return ApproximateSolution(
        f=f, E=lambda t, x: np.zeros((np.atleast_2d(x).shape[0], 3)),
        B=lambda t, x: np.tile(B, (np.atleast_2d(x).shape[0], 1)),
        rho=lambda x: np.full(np.atleast_2d(x).shape[0], rho0), eps=eps, grad_f=grad_f, fd_step=fd_step)


def prototype_constants(profile, eps_values: Iterable[float], B_e=(0.0, 0.0, 1.0), T_a: float = 1.0,
                        S_r: float = 1e-8, N_r: float = 1e-8) -> WellPreparedConstants:
    """Constants the stationary prototype satisfies uniformly over ``eps_values``."""
    eps_values = list(eps_values)
    sup = max(float(profile.sup), 0.0)
    return WellPreparedConstants(T_a=T_a, P_a=profile.momentum_radius, S_a=sup,
                                 H_a=float(np.linalg.norm(B_e)),
                                 L_a=max(profile.lipschitz_xi(e) for e in eps_values) * (1 + 1e-3),
                                 S_h=1e-12, S_r=S_r, N_r=N_r)


# ---------------------------------------------------------------------------
# Compatible families of initial data
# ---------------------------------------------------------------------------

def l2_norm_tensor(f0, box: SamplingBox, xi_radius: float, n_x: int = 16, n_ball: int = 12,
                   panels: int = 1) -> float:
    """L2 norm over box x ball with composite Gauss-Legendre in x and a ball rule in xi."""
    axes = [composite_gauss_legendre(np.linspace(a, b, panels + 1), n_x) for a, b in zip(box.lo, box.hi)]
    X = np.stack(np.meshgrid(*[a[0] for a in axes], indexing="ij"), -1).reshape(-1, 3)
    WX = np.einsum("i,j,k->ijk", *[a[1] for a in axes]).ravel()
    ball = ball_rule(xi_radius, n_ball)
    total = 0.0
    chunk = max(1, 2_000_000 // ball.size)
    for s in range(0, X.shape[0], chunk):
        Xs = X[s:s + chunk]
        A, K = _product(Xs, ball.points)
        fv = np.asarray(f0(A, K), float).reshape(Xs.shape[0], ball.size)
        total += float(WX[s:s + chunk] @ (fv ** 2 @ ball.weights))
    return math.sqrt(total)


def validate_compatible(family: Callable[[float], Callable], P0: float, S0: float, N0: float,
                        eps_list: Iterable[float], box: SamplingBox = SamplingBox(), l2_constant: float = 1.0,
                        tol: float = 1e-12, marginal_tol: float = 1e-9, l2_nodes: int = 16, l2_rtol: float = 1e-6,
                        l2_norm: Callable[[float], float] | None = None) -> ValidationReport:
    """Support, sup-norm, L2 smallness and zero momentum marginal, per eps.

    ``l2_constant`` is the implied constant in ``||f0_eps|| <= C N0 eps``;
    ``l2_norm`` may supply an accurate norm for families with fine structure;
    ``l2_rtol`` absorbs the quadrature error of the norm.
    """
    rep = ValidationReport("compatible")
    x = box.x_grid()
    xi = box.xi_grid(P0)
    X, XI = _product(x, xi)
    outside = np.linalg.norm(XI, axis=1) > P0
    rule = ball_rule(P0, 16)
    Xm, XIm = _product(x, rule.points)
    for eps in eps_list:
        eps = float(eps)
        f0 = family(eps)
        fv = np.asarray(f0(X, XI), float)
        a = np.abs(fv)
        ko = int(np.argmax(np.where(outside, a, -1.0))) if np.any(outside) else 0
        out_sup = float(a[ko]) if np.any(outside) else 0.0
        rep.clauses.append(ClauseResult("minimalradiusforf", out_sup <= tol, out_sup, tol,
                                        _witness(x=X[ko], xi=XI[ko]) if out_sup > tol else None, eps))
        k = int(np.argmax(a))
        rep.clauses.append(ClauseResult("Lebesgue bounds", a[k] <= S0 * (1 + tol), float(a[k]), S0,
                                        _witness(x=X[k], xi=XI[k]) if a[k] > S0 * (1 + tol) else None, eps))
        norm = l2_norm(eps) if l2_norm is not None else l2_norm_tensor(f0, box, P0, l2_nodes)
        bound = l2_constant * N0 * eps
        rep.clauses.append(ClauseResult("absorptioforsm", norm <= bound * (1 + l2_rtol), norm, bound, None, eps))
        vals = np.asarray(f0(Xm, XIm), float).reshape(x.shape[0], rule.size)
        marg = vals @ rule.weights
        mass = np.abs(vals) @ rule.weights
        scale = max(float(np.max(mass)), 1e-300)
        km = int(np.argmax(np.abs(marg)))
        rel = float(abs(marg[km]) / scale)
        rep.clauses.append(ClauseResult("compatibility conditions", rel <= marginal_tol, rel, marginal_tol,
                                        _witness(x=x[km]) if rel > marginal_tol else None, eps,
                                        detail="largest momentum marginal relative to the largest mass"))
    return rep


def scaled_family(f0: Callable) -> Callable[[float], Callable]:
    """The family ``eps -> eps * f0``."""
    return lambda eps: (lambda x, xi: eps * np.asarray(f0(x, xi), float))


# ---------------------------------------------------------------------------
# Oscillatory families
# ---------------------------------------------------------------------------

def _odd_bump(y):
    return np.where(np.abs(y) < 1.0, y * (1.0 - np.minimum(y * y, 1.0)) ** 4, 0.0)


@dataclass(frozen=True)
class OscillatoryFamily:
    """``f0_eps(x, xi) = chi(x) q(phi_1(x)/eps) q(phi_2(x)/eps) g(xi)``.

    ``q(y) = (y/w) (1 - (y/w)^2)^4`` on ``|y| < w`` has zero mean and compact
    support in the fast variable; ``phi(x) = (x_1 + a sin x_3, x_2 + a cos x_3, x_3)``
    is a global diffeomorphism with unit Jacobian. ``g`` is the momentum
    profile, with zero integral for compatibility.
    """

    g: Callable[[np.ndarray], np.ndarray]
    radius: float = 1.5
    shear: float = 0.3
    width: float = 0.25

    def phi(self, x):
        x = np.asarray(x, float)
        return np.stack([x[..., 0] + self.shear * np.sin(x[..., 2]),
                         x[..., 1] + self.shear * np.cos(x[..., 2]), x[..., 2]], axis=-1)

    def spatial(self, eps: float, x) -> np.ndarray:
        x = np.asarray(x, float)
        u2 = np.sum(x * x, axis=-1) / self.radius ** 2
        chi = np.where(u2 < 1.0, (1.0 - np.minimum(u2, 1.0)) ** 4, 0.0)
        p = self.phi(x) / (eps * self.width)
        return chi * _odd_bump(p[..., 0]) * _odd_bump(p[..., 1])

    def __call__(self, eps: float) -> Callable:
        return lambda x, xi: self.spatial(eps, x) * np.asarray(self.g(xi), float)

    def l2_norm(self, eps: float, xi_radius: float, n_nodes: int = 6, n_ball: int = 10) -> float:
        """Norm by composite Gauss-Legendre with panels finer than eps across the fast directions."""
        R = self.radius
        fast = max(8, int(math.ceil(4.0 * R / (eps * self.width))))
        ax12 = composite_gauss_legendre(np.linspace(-R, R, fast + 1), n_nodes)
        ax3 = composite_gauss_legendre(np.linspace(-R, R, 9), n_nodes)
        total = 0.0
        for x3, w3 in zip(*ax3):
            X = np.stack(np.meshgrid(ax12[0], ax12[0], [x3], indexing="ij"), -1).reshape(-1, 3)
            W = np.outer(ax12[1], ax12[1]).ravel() * w3
            total += float(W @ self.spatial(eps, X) ** 2)
        ball = ball_rule(xi_radius, n_ball)
        gnorm2 = float(ball.weights @ np.asarray(self.g(ball.points), float) ** 2)
        return math.sqrt(total * gnorm2)


def l2_slope(norms: dict) -> float:
    """Log-log slope of ``eps -> norm`` by least squares."""
    e = np.array(sorted(norms))
    v = np.array([norms[k] for k in e])
    return float(np.polyfit(np.log(e), np.log(v), 1)[0])
