"""Batch command line: ``rvmlab <subcommand> [--config PATH] [--out DIR] ...``.

Every subcommand prints one JSON report on stdout (also written to
``--out/report.json`` when ``--out`` is given) and exits 0 exactly when every
configured check passes. Exit status 1 means a check failed or a validator
aborted a run; 2 means the configuration could not be used.

The thread count is ``--threads``, overridden by the ``RVMLAB_THREADS``
environment variable when that is set.
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
from importlib import metadata, resources

import click
import numpy as np

from .vmsolver.scenario import ConfigError, check_schema, load_yaml_with_marks

THREADS_ENV = "RVMLAB_THREADS"
_DEFAULT_CONFIGS = {"verify-lemmas": "lemmas.yaml", "radon-selftest": "radon.yaml", "run-scenario": "prototype.yaml",
                    "increment": "increment.yaml", "gyration": "gyration.yaml"}

_LEMMA_SCHEMA = {
    "sphere": {"degree": int, "rho_x": list, "tau": list, "radii": list},
    "trace": {"enabled": bool, "limit": int, "deltas": list},
    "weights": {"samples": int},
    "sphere_average": {"delta": list, "eta": list, "regime_eta": list},
    "pushforward": {"samples": int},
    "kirchhoff": {"enabled": bool, "cells": int, "t": float, "method": str},
}
_RADON_SCHEMA = {"degree": int, "probes": int, "p_points": int, "p_extent": float}
_GYRATION_SCHEMA = {"eps": float, "t": float, "eps_sweep": list, "varying_field": bool}
_INCREMENT_SCHEMA = {"run_dir": str, "manifest": str, "t": float, "tolerance": float,
                     "seed": {"x": list, "xi": list},
                     "quadrature": {"time_nodes": int, "sphere_points": int, "xi_nodes": list}}


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def set_threads(requested: int | None) -> int:
    """Apply the thread count, with the environment variable taking precedence."""
    import numba

    if "NUMBA_THREADING_LAYER" not in os.environ:
        # The portable layer avoids probing an outdated system TBB.
        numba.config.THREADING_LAYER = "workqueue"
    env = os.environ.get(THREADS_ENV)
    n = int(env) if env else (requested or 1)
    n = max(1, min(n, numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


class Context:
    def __init__(self, command: str, config: str | None, out: str | None, threads: int, seed: int, profile: str):
        from .suites import TOLERANCE_PROFILES

        self.command = command
        self.config_path = config
        self.out = out
        self.threads = threads
        self.seed = seed
        self.profile = profile
        self.tolerances = TOLERANCE_PROFILES[profile]
        if out:
            os.makedirs(out, exist_ok=True)

    def read_text(self) -> tuple[str, str]:
        if self.config_path:
            with open(self.config_path) as fh:
                return fh.read(), self.config_path
        name = _DEFAULT_CONFIGS[self.command]
        return resources.files("rvmlab.configs").joinpath(name).read_text(), f"<default {name}>"

    def load(self, schema: dict) -> dict:
        text, source = self.read_text()
        data, marks = load_yaml_with_marks(text, source)
        check_schema(data if data is not None else {}, schema, marks, source)
        return data or {}

    def path(self, name: str) -> str | None:
        return os.path.join(self.out, name) if self.out else None

    def manifest(self, scenario: str, config_hash: str, outputs: list[str]) -> dict:
        return {"scenario": scenario, "config_hash": config_hash, "seeds": {"seed": self.seed},
                "artifact_version": _version(), "threads": self.threads, "tolerance_profile": self.profile,
                "outputs": outputs}

    def finish(self, report: dict) -> None:
        report = _jsonable(report)
        text = json.dumps(report, indent=2, sort_keys=True)
        if self.out:
            with open(self.path("report.json"), "w") as fh:
                fh.write(text + "\n")
        click.echo(text)
        sys.exit(0 if report.get("passed") else 1)


def _common(fn):
    fn = click.option("--tolerance-profile", "profile", type=click.Choice(["strict", "desk"]), default="strict",
                      show_default=True, help="Shipped tolerance and sample-size set.")(fn)
    fn = click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True,
                      help="Seed for every random sample.")(fn)
    fn = click.option("--threads", type=click.IntRange(1), default=1, show_default=True,
                      help=f"Worker threads; {THREADS_ENV} overrides.")(fn)
    fn = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")(fn)
    fn = click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
                      help="YAML configuration; the shipped default when omitted.")(fn)
    return fn


def _context(command: str, config, out, threads, seed, profile) -> Context:
    return Context(command, config, out, set_threads(threads), seed, profile)


def _config_failure(ctx: Context, exc: Exception) -> None:
    report = {"command": ctx.command, "passed": False, "error": str(exc),
              "line": getattr(exc, "line", None), "column": getattr(exc, "column", None)}
    click.echo(json.dumps(report, indent=2, sort_keys=True))
    if ctx.out:
        with open(ctx.path("report.json"), "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
    sys.exit(2)


@click.group()
@click.version_option(_version(), prog_name="rvmlab")
def main():
    """Numerical checks and particle-in-cell runs for relativistic Vlasov-Maxwell."""


@main.command("verify-lemmas")
@_common
def verify_lemmas(config, out, threads, seed, profile):
    """Sphere identities, trace identity, weight bounds, sphere average, pushforward, Kirchhoff."""
    from . import suites

    ctx = _context("verify-lemmas", config, out, threads, seed, profile)
    try:
        cfg = ctx.load(_LEMMA_SCHEMA)
    except ConfigError as exc:
        _config_failure(ctx, exc)
    tol = ctx.tolerances
    report = {"command": "verify-lemmas", "suites": {}}
    sp = cfg.get("sphere")
    if sp is not None:
        report["suites"]["sphere"] = suites.sphere_suite(
            int(sp.get("degree", 47)), tuple(sp.get("rho_x", suites.SPHERE_RHO_X)),
            tuple(sp.get("tau", suites.SPHERE_TAUS)), tuple(sp.get("radii", suites.SPHERE_RADII)),
            tolerance=tol["sphere"])
    tr = cfg.get("trace")
    if tr is not None and tr.get("enabled", True):
        report["suites"]["trace"] = suites.trace_suite(tol["trace"], tr.get("deltas"), tr.get("limit"))
    wb = cfg.get("weights")
    if wb is not None:
        report["suites"]["weights"] = suites.weight_bound_suite(
            min(int(wb.get("samples", tol["weight_samples"])), tol["weight_samples"]), ctx.seed)
    sa = cfg.get("sphere_average")
    if sa is not None:
        report["suites"]["sphere_average"] = suites.sphere_average_suite(
            tuple(sa.get("delta", (0.5, 1.0, 1.5, 2.0))), tuple(sa.get("eta", (0.5, 1.0, 4.0, 10.0))),
            tuple(sa.get("regime_eta", (1.0, 2.0, 4.0, 8.0))), tol["sphere_average"], tol["sphere_average_spread"])
    pf = cfg.get("pushforward")
    if pf is not None:
        report["suites"]["pushforward"] = suites.pushforward_suite(
            int(pf.get("samples", tol["pushforward_samples"])), ctx.seed, tol["pushforward"])
    kh = cfg.get("kirchhoff")
    if kh is not None and kh.get("enabled", True):
        report["suites"]["kirchhoff"] = suites.kirchhoff_suite(
            int(kh.get("cells", 64)), float(kh.get("t", 2.0)), tol["kirchhoff"], kh.get("method", "fd4"),
            seed=ctx.seed % 2 ** 32)
    if not report["suites"]:
        report["warning"] = "no suites configured"
    report["passed"] = all(s["passed"] for s in report["suites"].values())
    report["manifest"] = ctx.manifest("verify-lemmas", _hash(cfg), ["report.json"] if out else [])
    ctx.finish(report)


@main.command("radon-selftest")
@_common
def radon_selftest(config, out, threads, seed, profile):
    """Radon round trip on a Gaussian bump and the exact Gaussian transform."""
    from .suites import radon_suite

    ctx = _context("radon-selftest", config, out, threads, seed, profile)
    try:
        cfg = ctx.load(_RADON_SCHEMA)
    except ConfigError as exc:
        _config_failure(ctx, exc)
    rep = radon_suite(int(cfg.get("degree", 23)), int(cfg.get("probes", 20)), int(cfg.get("p_points", 361)),
                      float(cfg.get("p_extent", 4.5)), ctx.tolerances["radon_round_trip"],
                      ctx.tolerances["radon_gaussian"], seed=ctx.seed % 2 ** 32)
    rep["command"] = "radon-selftest"
    rep["manifest"] = ctx.manifest("radon-selftest", _hash(cfg), ["report.json"] if out else [])
    ctx.finish(rep)


@main.command("gyration")
@_common
def gyration(config, out, threads, seed, profile):
    """Simplified gyration model against its closed form, and gradient growth."""
    from .suites import gyration_suite

    ctx = _context("gyration", config, out, threads, seed, profile)
    try:
        cfg = ctx.load(_GYRATION_SCHEMA)
    except ConfigError as exc:
        _config_failure(ctx, exc)
    rep = gyration_suite(float(cfg.get("eps", 0.1)), float(cfg.get("t", 1.0)), ctx.tolerances["gyration"],
                         tuple(cfg.get("eps_sweep", (1.0, 0.5, 0.25))), ctx.tolerances["gyration_slope"],
                         bool(cfg.get("varying_field", True)))
    rep["command"] = "gyration"
    rep["manifest"] = ctx.manifest("gyration", _hash(cfg), ["report.json"] if out else [])
    ctx.finish(rep)


def _hash(data) -> str:
    from .vmsolver.history import config_hash

    return config_hash(data)


@main.command("run-scenario")
@_common
def run_scenario_cmd(config, out, threads, seed, profile):
    """Validate a scenario, run the PIC solver and write diagnostics and snapshots."""
    from .vmsolver.coupled import max_momentum_seed
    from .vmsolver.scenario import ScenarioConfig, run_scenario, scenario_checks, validate_scenario

    ctx = _context("run-scenario", config, out, threads, seed, profile)
    try:
        text, source = ctx.read_text()
        cfg = ScenarioConfig.from_yaml(text, source)
    except ConfigError as exc:
        _config_failure(ctx, exc)
    report = {"command": "run-scenario", "scenario": cfg.name, "kind": cfg.kind, "epsilon": cfg.epsilon}
    validation = validate_scenario(cfg)
    report["validation"] = validation.as_dict()
    if not validation.passed:
        report.update({"passed": False, "aborted": True,
                       "error": "validator failure before the run: " + ", ".join(validation.failed())})
        report["manifest"] = ctx.manifest(cfg.name, cfg.hash(), ["report.json"] if out else [])
        ctx.finish(report)
    run = run_scenario(cfg)
    outputs = []
    if out:
        run.series.to_csv(ctx.path("diagnostics.csv"))
        with open(ctx.path("scenario.json"), "w") as fh:
            json.dump(_jsonable(cfg.to_dict()), fh, indent=2, sort_keys=True)
        outputs += ["diagnostics.csv", "scenario.json", "report.json"]
        if run.history is not None:
            run.history.save(ctx.path("snapshots"), cfg.hash())
            outputs.append("snapshots/manifest.json")
    checks = scenario_checks(run)
    report.update(checks)
    report["particles"] = int(run.state.n_particles)
    report["final_time"] = float(run.state.t)
    live = np.abs(run.state.w) > run.context.weight_floor
    if np.any(live):
        s = max_momentum_seed(run)
        report["max_momentum_seed"] = {"x": s.x.tolist(), "xi": s.xi.tolist()}
    report["manifest"] = ctx.manifest(cfg.name, cfg.hash(), outputs)
    ctx.finish(report)


def _read_series(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return (np.array([float(r["t"]) for r in rows]), np.array([float(r["P_bound"]) for r in rows]))


@main.command("increment")
@_common
def increment_cmd(config, out, threads, seed, profile):
    """Four-term breakdown of the momentum increment from a stored run."""
    from .increment import QuadratureSpec, compare_increment, support_bound_from_increment
    from .kinematics import PhasePoint
    from .vmsolver.coupled import store_solution
    from .vmsolver.history import FieldHistory, MissingSnapshots
    from .vmsolver.scenario import ScenarioConfig

    ctx = _context("increment", config, out, threads, seed, profile)
    try:
        inc = ctx.load(_INCREMENT_SCHEMA)
        base = os.path.dirname(os.path.abspath(ctx.config_path)) if ctx.config_path else os.getcwd()
        run_dir = os.path.join(base, inc.get("run_dir", "run"))
        with open(os.path.join(run_dir, "scenario.json")) as fh:
            cfg = ScenarioConfig(**json.load(fh))
        with open(os.path.join(run_dir, "report.json")) as fh:
            run_report = json.load(fh)
    except ConfigError as exc:
        _config_failure(ctx, exc)
    except (OSError, TypeError, ValueError) as exc:
        _config_failure(ctx, ConfigError(f"cannot read the stored run: {exc}"))
    t = float(inc.get("t", cfg.dt * cfg.steps))
    report = {"command": "increment", "scenario": cfg.name, "t": t}
    manifest = os.path.join(run_dir, inc.get("manifest", "snapshots/manifest.json"))
    every = max(1, cfg.snapshot_every)
    needed = [k * every * cfg.dt for k in range(int(math.floor(t / (every * cfg.dt) + 1e-9)) + 1)]
    try:
        history = FieldHistory.load(manifest, needed, tolerance=1e-6 * max(1.0, t))
    except (MissingSnapshots, FileNotFoundError) as exc:
        report.update({"passed": False, "error": "snapshot store incomplete",
                       "missing_times": getattr(exc, "missing", [str(exc)])})
        report["manifest"] = ctx.manifest(cfg.name, cfg.hash(), ["report.json"] if out else [])
        ctx.finish(report)
    if "seed" in inc:
        pp = PhasePoint(inc["seed"]["x"], inc["seed"]["xi"])
    elif "max_momentum_seed" in run_report:
        pp = PhasePoint(run_report["max_momentum_seed"]["x"], run_report["max_momentum_seed"]["xi"])
    else:
        _config_failure(ctx, ConfigError("no seed given and the stored run names none"))
    times, P = _read_series(os.path.join(run_dir, "diagnostics.csv"))
    q = inc.get("quadrature", {})
    spec = QuadratureSpec(int(q.get("time_nodes", 8)), int(q.get("sphere_points", 26)),
                          tuple(int(v) for v in q.get("xi_nodes", (6, 6, 6))), seed=ctx.seed % 2 ** 32)
    sol = store_solution(cfg, history, times, P, pp, t)
    cmp = compare_increment(sol, t, spec)
    bd = cmp["breakdown"]
    tol = float(inc.get("tolerance", 0.1))
    budget = tol * max(abs(cmp["D_ode"]), 0.01)
    report.update({"D_ode": cmp["D_ode"], "breakdown": bd.as_dict(), "total": cmp["total"],
                   "residual": cmp["residual"], "residual_budget": budget,
                   "support_envelope": support_bound_from_increment(sol.P(0.0), bd),
                   "passed": cmp["residual"] <= budget})
    report["manifest"] = ctx.manifest(cfg.name, cfg.hash(), ["report.json"] if out else [])
    ctx.finish(report)


@main.command("report")
@click.argument("reports", nargs=-1, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")
def report_cmd(reports, out):
    """Summarize JSON reports written by the other subcommands."""
    rows = []
    for path in reports:
        with open(path) as fh:
            data = json.load(fh)
        rows.append({"path": path, "command": data.get("command"), "passed": bool(data.get("passed"))})
    summary = {"command": "report", "reports": rows, "passed": bool(rows) and all(r["passed"] for r in rows)}
    if not rows:
        summary["warning"] = "no reports given"
    text = json.dumps(summary, indent=2, sort_keys=True)
    if out:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "summary.json"), "w") as fh:
            fh.write(text + "\n")
    click.echo(text)
    sys.exit(0 if summary["passed"] else 1)


if __name__ == "__main__":  # pragma: no cover
    main()
