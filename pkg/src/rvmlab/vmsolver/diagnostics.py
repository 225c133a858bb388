"""Run diagnostics: support radii, energies, constraint residuals and bound checks."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .pic import PICState, boris_push, div_B

COLUMNS = ("t", "P", "P_bound", "Q", "energy", "kinetic", "field_energy", "relative_energy",
           "EE", "gauss_residual", "divB_residual")


@dataclass
class DiagnosticContext:
    """Reference data fixed at the start of a run.

    ``M_of_xi`` is the equilibrium density as a function of momentum (``None``
    without equilibrium), ``B_ref`` the uniform field of the approximate
    solution, ``EE_f0`` the squared L2 norm of the initial perturbation,
    ``P_eq`` the momentum radius of the equilibrium and ``center`` the
    reference point for the spatial support radius.
    """

    center: np.ndarray
    B_ref: np.ndarray
    M_of_xi: Callable[[np.ndarray], np.ndarray] | None = None
    EE_f0: float = 0.0
    P_eq: float = 0.0
    weight_floor: float = 1e-300
    kinetic_eq: float = 0.0
    M_sum0: float = 0.0


@dataclass
class DiagnosticsSeries:
    rows: list = field(default_factory=list)

    def append(self, row: dict) -> None:
        self.rows.append({k: float(row[k]) for k in COLUMNS})

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def __len__(self):
        return len(self.rows)

    @property
    def P_inf(self) -> np.ndarray:
        """Running maximum of sqrt(1 + P^2) using the support bound column."""
        return np.maximum.accumulate(np.sqrt(1.0 + self.column("P_bound") ** 2))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            for r in self.rows:
                w.writerow([repr(r[k]) for k in COLUMNS])


def centred_momenta(state: PICState) -> np.ndarray:
    """Momenta at the integer time of the fields: mean of the two half steps."""
    ahead = state.xi.copy()
    boris_push(ahead, state.fields_at(state.x), state.dt)
    return 0.5 * (state.xi + ahead)


def _min_image(d: np.ndarray, L: float) -> np.ndarray:
    return d - L * np.round(d / L)


def make_context(state: PICState, center, B_ref, M_of_xi=None, P_eq: float = 0.0,
                 xi_cell_volume: float = 1.0) -> DiagnosticContext:
    """Context with the perturbation norm and equilibrium sums of the initial state."""
    dV = state.grid.cell_volume * xi_cell_volume
    w_eq = state.w_eq if state.w_eq is not None else np.zeros_like(state.w)
    pert = state.w - w_eq
    floor = 1e-14 * max(float(np.max(np.abs(state.w))), 1e-300)
    xi0 = state.xi0
    g0 = np.sqrt(1.0 + np.sum(xi0 ** 2, axis=1))
    ctx = DiagnosticContext(np.asarray(center, float), np.asarray(B_ref, float), M_of_xi,
                            float(np.sum(pert ** 2) / dV), float(P_eq), floor,
                            float(np.sum(w_eq * g0)))
    if M_of_xi is not None:
        # Same time-centred momenta as the diagnostics, so EE(0) is the perturbation norm.
        ctx.M_sum0 = float(np.sum(state.w * M_of_xi(centred_momenta(state))))
    return ctx


def diagnostics(state: PICState, series: DiagnosticsSeries, ctx: DiagnosticContext) -> dict:
    """Append one row for the current integer time."""
    xi = centred_momenta(state)
    g = np.sqrt(1.0 + np.sum(xi * xi, axis=1))
    live = np.abs(state.w) > ctx.weight_floor
    P = float(np.max(np.linalg.norm(xi[live], axis=1))) if np.any(live) else 0.0
    w_eq = state.w_eq if state.w_eq is not None else np.zeros_like(state.w)
    carriers = np.abs(state.w - w_eq) > ctx.weight_floor
    if np.any(carriers):
        d = _min_image(state.x[carriers] - ctx.center, state.grid.length)
        Q = float(np.max(np.linalg.norm(d, axis=1)))
    else:
        Q = 0.0
    dv = state.grid.cell_volume
    e2 = float(np.sum(state.E ** 2)) * dv
    b2 = float(np.sum(state.B ** 2)) * dv
    db2 = float(np.sum((state.B - ctx.B_ref[:, None, None, None]) ** 2)) * dv
    kinetic = float(np.sum(state.w * g))
    EE_f = ctx.EE_f0
    if ctx.M_of_xi is not None:
        EE_f += 2.0 * (ctx.M_sum0 - float(np.sum(state.w * ctx.M_of_xi(xi))))
    bscale = max(float(np.max(np.abs(state.B))), 1e-300)
    row = {"t": state.t, "P": P, "P_bound": max(P, ctx.P_eq), "Q": Q,
           "energy": kinetic + 0.5 * (e2 + b2), "kinetic": kinetic, "field_energy": 0.5 * (e2 + b2),
           "relative_energy": (kinetic - ctx.kinetic_eq) + 0.5 * (e2 + db2),
           "EE": EE_f + e2 + db2,
           "gauss_residual": state.gauss_residual(),
           "divB_residual": float(np.max(np.abs(div_B(state.B, state.grid.dx)))) * state.grid.dx / bscale}
    series.append(row)
    return row


# ---------------------------------------------------------------------------
# Bound checks
# ---------------------------------------------------------------------------

def integral_p_inf_32(t: np.ndarray, p_inf: np.ndarray) -> np.ndarray:
    """Cumulative integral of the piecewise-linear interpolant of p_inf, raised to 3/2."""
    t = np.asarray(t, float)
    p = np.asarray(p_inf, float)
    out = np.zeros_like(t)
    for i in range(1, len(t)):
        h = t[i] - t[i - 1]
        a, b = p[i - 1], p[i]
        if abs(b - a) < 1e-14 * max(a, 1.0):
            seg = h * a ** 1.5
        else:
            seg = h * 0.4 * (b ** 2.5 - a ** 2.5) / (b - a)
        out[i] = out[i - 1] + seg
    return out


def gronwall_rhs(t, p_inf, eps: float, N0: float, N_r: float, L_a: float) -> np.ndarray:
    t = np.asarray(t, float)
    return eps ** 2 * (N0 ** 2 + N_r ** 2) * np.exp(t + 4.0 * (L_a + 1.0) * integral_p_inf_32(t, p_inf))


def gronwall_check(series: DiagnosticsSeries, eps: float, N0: float, N_r: float = 0.0, L_a: float = 0.0,
                   rel_slack: float = 1e-12) -> dict:
    """L2-energy bound at every recorded time, with the first violation if any.

    ``rel_slack`` only absorbs rounding: at t = 0 both sides are the same number.
    """
    t = series.column("t")
    EE = series.column("EE")
    rhs = gronwall_rhs(t, series.P_inf, eps, N0, N_r, L_a)
    bad = EE > rhs * (1.0 + rel_slack)
    margin = float(np.min(rhs - EE)) if len(t) else math.inf
    out = {"passed": not bool(np.any(bad)), "margin": margin,
           "max_ratio": float(np.max(EE / rhs)) if len(t) else 0.0,
           "first_violation": float(t[np.argmax(bad)]) if np.any(bad) else None,
           "EE_over_eps2_max": float(np.max(EE)) / eps ** 2 if len(t) else 0.0}
    return out


def eps_uniformity(reports: dict) -> dict:
    """Spread of sup EE / eps^2 across an eps sweep (``reports`` maps eps -> gronwall report)."""
    vals = {float(e): r["EE_over_eps2_max"] for e, r in reports.items()}
    hi, lo = max(vals.values()), min(vals.values())
    return {"values": vals, "spread": hi / lo if lo > 0 else math.inf}


def relative_energy_check(series: DiagnosticsSeries, tolerance: float = 0.02) -> dict:
    """Drift of the relative energy, scaled by its initial value."""
    e = series.column("relative_energy")
    total = series.column("energy")
    drift = float(np.max(np.abs(e - e[0])))
    scale = max(abs(float(e[0])), 1e-12 * abs(float(total[0])), 1e-300)
    return {"drift": drift, "relative_drift": drift / scale, "initial": float(e[0]),
            "passed": drift / scale <= tolerance}


def energy_drift(series: DiagnosticsSeries) -> float:
    e = series.column("energy")
    return float(np.max(np.abs(e - e[0])) / abs(e[0]))


def light_cone_check(series: DiagnosticsSeries, dx: float) -> dict:
    t = series.column("t")
    Q = series.column("Q")
    bound = Q[0] + t + dx
    return {"passed": bool(np.all(Q <= bound)), "max_excess": float(np.max(Q - bound))}
