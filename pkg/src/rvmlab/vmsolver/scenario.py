"""Scenario configuration, quiet-start particle loading and PIC runs.

Two kinds of scenario are supported:

``prototype``
    uniform equilibrium ``M(eps, <xi>)`` in the uniform field ``B_e / eps``,
    plus an optional perturbation ``eps * f0`` with zero momentum marginal.
``coupled``
    a localized charged blob ``f0`` in vacuum, neutralized by a uniform
    immobile background; used to close the increment representation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Any

import numpy as np
import yaml

from ..fields import EquilibriumProfile, make_equilibrium
from .diagnostics import DiagnosticContext, DiagnosticsSeries, diagnostics, make_context
from .history import FieldHistory, config_hash
from .pic import GridSpec, PICState, init_state, pic_step

# Radial coefficient that makes the momentum marginal of the mixed profile
# vanish: ratio of the moments of u^4 and u^2 against (1 - u^2)^4 u^2 du.
MIXED_BALANCE = 3.0 / 13.0


class ConfigError(ValueError):
    """Malformed scenario file; the message carries line and column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None, source: str = "<config>"):
        loc = f"{source}:{line}:{column}: " if line is not None else f"{source}: "
        super().__init__(loc + message)
        self.line = line
        self.column = column


# ---------------------------------------------------------------------------
# Profiles
# ---------------------------------------------------------------------------

def _poly_bump(u2: np.ndarray) -> np.ndarray:
    return np.where(u2 < 1.0, (1.0 - np.minimum(u2, 1.0)) ** 4, 0.0)


@dataclass(frozen=True)
class PerturbationProfile:
    """``amplitude * s(x) * m(xi)`` with polynomial bumps of degree 8.

    ``bump``: m = b(u); ``odd``: m = (xi_1/R) b(u); ``mixed``:
    m = (xi_1/R + balance - u^2) b(u), where u = |xi|/R and
    b(u) = (1 - u^2)^4. The last two have zero momentum marginal.
    """

    amplitude: float = 0.0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 1.0
    xi_radius: float = 1.0
    profile: str = "bump"
    balance: float = MIXED_BALANCE

    def __post_init__(self):
        if self.profile not in ("bump", "odd", "mixed", "none"):
            raise ValueError(f"unknown perturbation profile {self.profile!r}")
        if not (self.radius > 0 and self.xi_radius > 0):
            raise ValueError("support radii must be positive")

    def spatial(self, x) -> np.ndarray:
        d = np.asarray(x, float) - np.asarray(self.center, float)
        return _poly_bump(np.sum(d * d, axis=-1) / self.radius ** 2)

    def momentum(self, xi) -> np.ndarray:
        xi = np.asarray(xi, float)
        u2 = np.sum(xi * xi, axis=-1) / self.xi_radius ** 2
        b = _poly_bump(u2)
        if self.profile == "bump":
            return b
        if self.profile == "odd":
            return xi[..., 0] / self.xi_radius * b
        if self.profile == "mixed":
            return (xi[..., 0] / self.xi_radius + self.balance - u2) * b
        return np.zeros(xi.shape[:-1])

    def __call__(self, x, xi) -> np.ndarray:
        if self.profile == "none" or self.amplitude == 0.0:
            return np.zeros(np.broadcast_shapes(np.shape(x)[:-1], np.shape(xi)[:-1]))
        return self.amplitude * self.spatial(x) * self.momentum(xi)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

_SCHEMA: dict[str, Any] = {
    "name": str, "kind": str, "epsilon": float, "seed": int,
    "grid": {"cells": int, "spacing": float},
    "time": {"dt": float, "steps": int, "snapshot_every": int},
    "equilibrium": {"m0": float, "r_max": float, "c2": float, "shape": str, "r_min": float, "eps_slope": float},
    "external_field": {"kind": str, "amplitude": list},
    "perturbation": {"profile": str, "amplitude": float, "center": list, "radius": float, "xi_radius": float},
    "particles": {"xi_per_axis": int, "x_per_cell": int},
    "compatible": {"P0": float, "S0": float, "N0": float},
    "tolerances": {"energy_drift": float, "relative_energy_drift": float, "gauss": float, "divB": float},
}


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    kind: str = "prototype"
    epsilon: float = 1.0
    seed: int = 0
    cells: int = 16
    spacing: float = 0.5
    dt: float = 0.05
    steps: int = 100
    snapshot_every: int = 0
    equilibrium: dict | None = None
    external_field: tuple[float, float, float] = (0.0, 0.0, 0.0)
    perturbation: dict = field(default_factory=dict)
    xi_per_axis: int = 6
    x_per_cell: int = 1
    compatible: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=lambda: {"energy_drift": 0.02, "relative_energy_drift": 0.02,
                                                      "gauss": 1e-10, "divB": 1e-10})

    def __post_init__(self):
        if self.kind not in ("prototype", "coupled"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")

    # -- derived objects ---------------------------------------------------

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.cells, self.spacing)

    def profile(self) -> EquilibriumProfile | None:
        if not self.equilibrium:
            return None
        eq = dict(self.equilibrium)
        return make_equilibrium(eq.pop("m0"), eq.pop("r_max"), eq.pop("c2"), **eq)

    def B_field(self) -> np.ndarray:
        """Uniform field of the approximate solution, ``B_e / eps``."""
        return np.asarray(self.external_field, float) / self.epsilon

    def perturbation_profile(self) -> PerturbationProfile:
        p = dict(self.perturbation)
        if not p or p.get("profile", "none") == "none":
            return PerturbationProfile(profile="none")
        center = p.get("center")
        center = tuple(self.grid.center) if center is None else tuple(float(c) for c in center)
        return PerturbationProfile(float(p.get("amplitude", 0.0)), center, float(p["radius"]),
                                   float(p["xi_radius"]), p.get("profile", "bump"))

    def scaled_perturbation(self) -> PerturbationProfile:
        """The perturbation actually loaded: amplitude times eps for prototypes."""
        base = self.perturbation_profile()
        if self.kind == "prototype":
            return replace(base, amplitude=base.amplitude * self.epsilon)
        return base

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        return config_hash(self.to_dict())

    # -- parsing -------------------------------------------------------------

    @classmethod
    def from_mapping(cls, data: dict) -> "ScenarioConfig":
        kw: dict[str, Any] = {}
        for key in ("name", "kind", "epsilon", "seed"):
            if key in data:
                kw[key] = data[key]
        g = data.get("grid", {})
        if "cells" in g:
            kw["cells"] = int(g["cells"])
        if "spacing" in g:
            kw["spacing"] = float(g["spacing"])
        tm = data.get("time", {})
        for key in ("dt", "steps", "snapshot_every"):
            if key in tm:
                kw[key] = tm[key]
        if "equilibrium" in data:
            kw["equilibrium"] = dict(data["equilibrium"])
        ef = data.get("external_field")
        if ef:
            if ef.get("kind", "constant") != "constant":
                raise ValueError("PIC scenarios support a constant external field only")
            kw["external_field"] = tuple(float(v) for v in ef["amplitude"])
        if "perturbation" in data:
            kw["perturbation"] = dict(data["perturbation"])
        pa = data.get("particles", {})
        if "xi_per_axis" in pa:
            kw["xi_per_axis"] = int(pa["xi_per_axis"])
        if "x_per_cell" in pa:
            kw["x_per_cell"] = int(pa["x_per_cell"])
        if "compatible" in data:
            kw["compatible"] = dict(data["compatible"])
        if "tolerances" in data:
            kw["tolerances"] = {**cls().tolerances, **data["tolerances"]}
        return cls(**kw)

    @classmethod
    def from_yaml(cls, text: str, source: str = "<config>") -> "ScenarioConfig":
        data, marks = load_yaml_with_marks(text, source)
        check_schema(data, _SCHEMA, marks, source)
        try:
            return cls.from_mapping(data)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(str(exc), 1, 1, source) from exc

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_yaml(fh.read(), str(path))


def load_yaml_with_marks(text: str, source: str = "<config>") -> tuple[Any, dict]:
    """Parse YAML; returns the data and a map from key path to (line, column)."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        if mark is not None:
            raise ConfigError(problem, mark.line + 1, mark.column + 1, source) from exc
        raise ConfigError(problem, None, None, source) from exc
    marks: dict = {}
    if node is None:
        return {}, marks

    def walk(n, path):
        # Keys already recorded their own position; keep it over the value's.
        marks.setdefault(path, (n.start_mark.line + 1, n.start_mark.column + 1))
        if isinstance(n, yaml.MappingNode):
            out = {}
            for k, v in n.value:
                key = k.value
                marks[path + (key,)] = (k.start_mark.line + 1, k.start_mark.column + 1)
                out[key] = walk(v, path + (key,))
            return out
        if isinstance(n, yaml.SequenceNode):
            return [walk(v, path + (i,)) for i, v in enumerate(n.value)]
        loader = yaml.SafeLoader("")
        return loader.construct_object(n, deep=True)

    return walk(node, ()), marks


def check_schema(data, schema, marks, source, path=()) -> None:
    """Reject unknown keys and wrongly typed values, naming their position."""
    if not isinstance(data, dict):
        line, col = marks.get(path, (1, 1))
        raise ConfigError("expected a mapping", line, col, source)
    for key, value in data.items():
        line, col = marks.get(path + (key,), (None, None))
        if key not in schema:
            raise ConfigError(f"unknown key {'.'.join(map(str, path + (key,)))!r}", line, col, source)
        expected = schema[key]
        if isinstance(expected, dict):
            if value is None:
                continue
            check_schema(value, expected, marks, source, path + (key,))
        elif value is not None:
            ok = (isinstance(value, (int, float)) and not isinstance(value, bool)) if expected is float \
                else isinstance(value, expected)
            if not ok:
                raise ConfigError(f"{'.'.join(map(str, path + (key,)))} should be {expected.__name__}",
                                  line, col, source)


# ---------------------------------------------------------------------------
# Particle loading
# ---------------------------------------------------------------------------

def momentum_lattice(radius: float, per_axis: int) -> tuple[np.ndarray, float]:
    """Cell-centred cubic lattice inside the open ball; closed under xi -> -xi."""
    h = 2.0 * radius / per_axis
    axis = -radius + (np.arange(per_axis) + 0.5) * h
    pts = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
    return pts[np.linalg.norm(pts, axis=1) < radius], h ** 3


def position_lattice(grid: GridSpec, per_cell: int, center=None, radius: float | None = None) -> tuple[np.ndarray, float]:
    h = grid.dx / per_cell
    axis = grid.origin[0] + (np.arange(grid.cells * per_cell) + 0.5) * h
    pts = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
    if radius is not None:
        pts = pts[np.linalg.norm(pts - np.asarray(center, float), axis=1) < radius]
    return pts, h ** 3


def lattice_balance(xi_pts: np.ndarray, xi_radius: float) -> float:
    """Radial coefficient giving the mixed profile an exactly zero lattice marginal."""
    u2 = np.sum(xi_pts ** 2, axis=1) / xi_radius ** 2
    b = _poly_bump(u2)
    return float(np.sum(u2 * b) / np.sum(b))


@dataclass
class LoadedParticles:
    x: np.ndarray
    xi: np.ndarray
    w: np.ndarray
    w_eq: np.ndarray
    xi_cell: float
    x_cell: float
    xi_spacing: float
    perturbation: PerturbationProfile


def load_particles(cfg: ScenarioConfig) -> LoadedParticles:
    grid = cfg.grid
    prof = cfg.profile()
    pert = cfg.scaled_perturbation()
    radii = [pert.xi_radius if pert.profile != "none" else 0.0]
    if prof is not None:
        radii.append(prof.momentum_radius)
    R = max(radii)
    xi_pts, dxi = momentum_lattice(R, cfg.xi_per_axis)
    if pert.profile == "mixed":
        pert = replace(pert, balance=lattice_balance(xi_pts, pert.xi_radius))
    if cfg.kind == "coupled":
        x_pts, dvx = position_lattice(grid, cfg.x_per_cell, pert.center, pert.radius)
    else:
        x_pts, dvx = position_lattice(grid, cfg.x_per_cell)
    nx, nk = x_pts.shape[0], xi_pts.shape[0]
    X = np.repeat(x_pts, nk, axis=0)
    XI = np.tile(xi_pts, (nx, 1))
    m = np.zeros(nk) if prof is None else prof.of_momentum(cfg.epsilon, xi_pts)
    w_eq = np.tile(m, nx) * dvx * dxi
    w = w_eq + pert(X, XI) * dvx * dxi
    keep = (w != 0.0) | (w_eq != 0.0)
    return LoadedParticles(X[keep], XI[keep], w[keep], w_eq[keep], dxi, dvx, 2.0 * R / cfg.xi_per_axis, pert)


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    config: ScenarioConfig
    state: PICState
    series: DiagnosticsSeries
    history: FieldHistory | None
    context: DiagnosticContext
    particles: LoadedParticles
    x0: np.ndarray
    xi0: np.ndarray
    P_record: list = field(default_factory=list)


def pic_init(cfg: ScenarioConfig, gauss_tolerance: float | None = None) -> tuple[PICState, LoadedParticles]:
    parts = load_particles(cfg)
    rho_bg = None
    state = init_state(cfg.grid, parts.x, parts.xi, parts.w, cfg.dt, cfg.B_field(), rho_bg, parts.w_eq,
                       gauss_tolerance if gauss_tolerance is not None else cfg.tolerances.get("gauss", 1e-10))
    return state, parts


def run_scenario(cfg: ScenarioConfig, record_history: bool | None = None, steps: int | None = None) -> RunResult:
    """Initialize, record diagnostics each step and optionally every field snapshot."""
    state, parts = pic_init(cfg)
    prof = cfg.profile()
    M = None if prof is None else (lambda xi, _p=prof, _e=cfg.epsilon: _p.of_momentum(_e, xi))
    center = parts.perturbation.center if parts.perturbation.profile != "none" else cfg.grid.center
    ctx = make_context(state, center, cfg.B_field(), M, 0.0 if prof is None else prof.momentum_radius,
                       parts.xi_cell)
    series = DiagnosticsSeries()
    if record_history is None:
        record_history = cfg.snapshot_every > 0 or cfg.kind == "coupled"
    every = max(1, cfg.snapshot_every)
    hist = FieldHistory(cfg.grid) if record_history else None
    x0 = state.x.copy()
    xi0 = state.xi0.copy()
    n = cfg.steps if steps is None else steps
    for k in range(n + 1):
        diagnostics(state, series, ctx)
        if hist is not None and (k % every == 0 or k == n):
            hist.record(state)
        if k < n:
            pic_step(state)
    return RunResult(cfg, state, series, hist, ctx, parts, x0, xi0)


def default_coupled_config(**overrides) -> ScenarioConfig:
    """Charged blob used to close the increment representation."""
    base = dict(name="coupled-blob", kind="coupled", epsilon=1.0, cells=32, spacing=0.4, dt=0.1, steps=25,
                snapshot_every=1, equilibrium=None, external_field=(0.0, 0.0, 0.5),
                perturbation={"profile": "bump", "amplitude": 0.2, "center": None, "radius": 3.0,
                              "xi_radius": 1.0},
                xi_per_axis=6, x_per_cell=1)
    base.update(overrides)
    return ScenarioConfig(**base)


def default_prototype_config(eps: float = 0.5, amplitude: float = 0.02, **overrides) -> ScenarioConfig:
    base = dict(name=f"prototype-eps{eps}", kind="prototype", epsilon=eps, cells=12, spacing=0.5, dt=0.05,
                steps=100, equilibrium={"m0": 0.05, "r_max": 2.0, "c2": 0.5},
                external_field=(0.0, 0.0, 0.5),
                perturbation={"profile": "mixed" if amplitude else "none", "amplitude": amplitude,
                              "center": None, "radius": 2.5, "xi_radius": 1.2},
                xi_per_axis=6, x_per_cell=1)
    base.update(overrides)
    return ScenarioConfig(**base)


# ---------------------------------------------------------------------------
# Validation before a run
# ---------------------------------------------------------------------------

# A coupled blob has a nonzero momentum marginal and O(1) size by design, so
# only the support and sup-norm clauses apply to it.
_COUPLED_CLAUSES = ("minimalradiusforf", "Lebesgue bounds")


def compatible_constants(cfg: ScenarioConfig) -> dict:
    """P0, S0, N0 of the scenario perturbation, overridden by ``cfg.compatible``."""
    from .validators import SamplingBox, l2_norm_tensor

    pert = cfg.perturbation_profile()
    box = _perturbation_box(pert)
    out = {"P0": pert.xi_radius, "S0": None, "N0": None}
    out.update({k: float(v) for k, v in cfg.compatible.items()})
    if out["S0"] is None:
        out["S0"] = float(abs(pert.amplitude)) * _momentum_sup(pert)
    if out["N0"] is None:
        out["N0"] = l2_norm_tensor(pert, SamplingBox(box.lo, box.hi), out["P0"])
    return out


def _perturbation_box(pert: PerturbationProfile):
    from .validators import SamplingBox

    c = np.asarray(pert.center, float)
    return SamplingBox(tuple(c - pert.radius), tuple(c + pert.radius))


def _momentum_sup(pert: PerturbationProfile) -> float:
    ax = np.linspace(-pert.xi_radius, pert.xi_radius, 81)
    g = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), -1).reshape(-1, 3)
    # Grid sup times a small margin for the gap to the true maximum.
    return float(np.max(np.abs(pert.momentum(g)))) * 1.01


def validate_scenario(cfg: ScenarioConfig):
    """Validators that must pass before ``run_scenario`` is allowed to start.

    Prototypes check the well-prepared clauses of the stationary state and
    the compatible-family clauses of ``eps -> eps f0``; coupled scenarios
    check support and sup-norm of the blob only.
    """
    from .validators import (ValidationReport, prototype_approximation, prototype_constants, scaled_family,
                             validate_compatible, validate_well_prepared)

    report = ValidationReport(cfg.kind)
    prof = cfg.profile()
    if cfg.kind == "prototype" and prof is not None:
        B_e = np.asarray(cfg.external_field, float)
        wp = validate_well_prepared(prototype_approximation(prof, cfg.epsilon, B_e),
                                    prototype_constants(prof, [cfg.epsilon], B_e))
        report.clauses.extend(wp.clauses)
    pert = cfg.perturbation_profile()
    if pert.profile != "none" and pert.amplitude != 0.0:
        const = compatible_constants(cfg)
        family = scaled_family(pert) if cfg.kind == "prototype" else (lambda eps: pert)
        comp = validate_compatible(family, const["P0"], const["S0"], const["N0"], [cfg.epsilon],
                                   _perturbation_box(pert))
        keep = comp.clauses if cfg.kind == "prototype" else [c for c in comp.clauses if c.name in _COUPLED_CLAUSES]
        report.clauses.extend(keep)
    return report


def scenario_checks(run: RunResult) -> dict:
    """Energy, constraint, light-cone and (for perturbed prototypes) L2-energy checks."""
    from .diagnostics import energy_drift, gronwall_check, light_cone_check, relative_energy_check

    cfg = run.config
    tol = cfg.tolerances
    s = run.series
    checks = {}
    drift = energy_drift(s)
    checks["energy_drift"] = {"value": drift, "bound": tol["energy_drift"], "passed": drift <= tol["energy_drift"]}
    rel = relative_energy_check(s, tol["relative_energy_drift"])
    checks["relative_energy_drift"] = {"value": rel["relative_drift"], "bound": tol["relative_energy_drift"],
                                       "passed": rel["passed"]}
    div = float(np.max(s.column("divB_residual")))
    checks["divB"] = {"value": div, "bound": tol["divB"], "passed": div <= tol["divB"]}
    gauss = float(np.max(s.column("gauss_residual")))
    checks["gauss"] = {"value": gauss, "bound": tol["gauss"], "passed": gauss <= tol["gauss"]}
    cone = light_cone_check(s, cfg.spacing)
    checks["light_cone"] = {"value": cone["max_excess"], "bound": 0.0, "passed": cone["passed"]}
    prof = cfg.profile()
    if cfg.kind == "prototype" and prof is not None and run.context.EE_f0 > 0.0:
        N0 = math.sqrt(run.context.EE_f0) / cfg.epsilon
        g = gronwall_check(s, cfg.epsilon, N0, 0.0, prof.lipschitz_xi(cfg.epsilon))
        checks["gronwall"] = {"value": g["max_ratio"], "bound": 1.0, "passed": g["passed"],
                              "EE_over_eps2_max": g["EE_over_eps2_max"], "N0": N0}
    return {"passed": all(c["passed"] for c in checks.values()), "checks": checks}
