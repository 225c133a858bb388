"""Solution provider backed by a recorded PIC run, for the increment engine."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..fields import InitialEM, kirchhoff_Eh
from ..kinematics import IntegratorSpec, PhasePoint, Trajectory, advance, integrate_characteristic, lorentz_factor
from ..quadrature import lebedev_by_points
from .history import FieldHistory
from .scenario import RunResult, ScenarioConfig, load_particles


@dataclass
class PICSolution:
    """Fields from the snapshot store and ``f`` by backward tracing to ``f0``.

    ``P_times``/``P_values`` sample the measured momentum support; ``margin``
    is added to cover the gap between the particle lattice and the true
    support. ``Q(t)`` is the ball of radius ``R0 + t`` around the blob centre.
    """

    history: FieldHistory
    trajectory: Trajectory
    f0_fn: object
    P_times: np.ndarray
    P_values: np.ndarray
    margin: float
    center: np.ndarray | None
    R0: float | None
    backtrace: IntegratorSpec = field(default_factory=lambda: IntegratorSpec("rk4", 0.05))
    kirchhoff_points: int = 110
    smooth: bool = True

    def __post_init__(self):
        E0, B0 = self.history.initial_fields()
        self._init = InitialEM.from_grids(E0, B0, "fd4")
        self._rule = lebedev_by_points(self.kirchhoff_points)

    def f0(self, x, xi):
        return np.asarray(self.f0_fn(x, xi), float)

    def f(self, t, x, xi):
        x = np.atleast_2d(np.asarray(x, float))
        xi = np.atleast_2d(np.asarray(xi, float))
        if t == 0.0:
            return self.f0(x, xi)
        xb, pb = advance(self.history, x, xi, float(t), 0.0, self.backtrace)
        return self.f0(xb, pb)

    def fields(self, t, x):
        return self.history.evaluate(float(t), x)

    def Eh(self, t, x):
        return kirchhoff_Eh(self._init, float(t), x, self._rule)

    def P(self, t):
        run_max = np.maximum.accumulate(self.P_values)
        return float(np.interp(t, self.P_times, run_max)) + self.margin

    def Q(self, t):
        if self.center is None:
            return None
        return (self.center, self.R0 + float(t))


def max_momentum_seed(run: RunResult) -> PhasePoint:
    """Initial phase point of the particle with the largest final momentum."""
    live = np.abs(run.state.w) > run.context.weight_floor
    idx = np.nonzero(live)[0]
    k = idx[np.argmax(np.linalg.norm(run.state.xi[idx], axis=1))]
    return PhasePoint(run.x0[k], run.xi0[k])


def initial_density(cfg: ScenarioConfig):
    """``f0`` of the scenario: blob alone, or equilibrium plus scaled perturbation."""
    pert = load_particles(cfg).perturbation if cfg.kind == "coupled" else cfg.scaled_perturbation()
    prof = cfg.profile()
    if prof is None:
        return pert
    eps = cfg.epsilon
    return lambda x, xi: prof.of_momentum(eps, np.atleast_2d(xi)) + pert(x, xi)


def store_solution(cfg: ScenarioConfig, history: FieldHistory, P_times, P_values, seed: PhasePoint, t: float,
                   trace: IntegratorSpec = IntegratorSpec("rk4", 0.01),
                   backtrace: IntegratorSpec = IntegratorSpec("rk4", 0.05)) -> PICSolution:
    """Provider from a snapshot store and the diagnostics of the run that wrote it.

    Uniform prototypes have no bounded spatial support, so ``Q`` covers all
    space; backward tracing does not wrap positions, which is exact only for
    spatially uniform data.
    """
    traj = integrate_characteristic(seed, history, 0.0, float(t), trace)
    parts = load_particles(cfg)
    pert = parts.perturbation
    if cfg.kind == "coupled":
        center, R0 = np.asarray(pert.center, float), pert.radius
    else:
        center, R0 = None, None
    return PICSolution(history, traj, initial_density(cfg), np.asarray(P_times, float),
                       np.asarray(P_values, float), parts.xi_spacing, center, R0, backtrace)


def pic_solution(run: RunResult, t: float, seed: PhasePoint | None = None,
                 trace: IntegratorSpec = IntegratorSpec("rk4", 0.01),
                 backtrace: IntegratorSpec = IntegratorSpec("rk4", 0.05)) -> PICSolution:
    if run.history is None:
        raise ValueError("the run did not record a field history")
    seed = seed or max_momentum_seed(run)
    return store_solution(run.config, run.history, run.series.column("t"), run.series.column("P_bound"),
                          seed, t, trace, backtrace)


def traced_increment(sol: PICSolution, t: float) -> float:
    _, xi = sol.trajectory.at(np.array([t]))
    return float(lorentz_factor(xi[0]) - lorentz_factor(sol.trajectory.Xi[0]))
