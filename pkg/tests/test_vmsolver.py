"""Particle-in-cell solver, scenario files, validators, snapshot store and gyration."""

import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from rvmlab.vmsolver import (ConfigError, DiagnosticsSeries, FieldHistory, GridSpec, MissingSnapshots,
                             ScenarioConfig, default_coupled_config, default_prototype_config, gronwall_check,
                             init_state, light_cone_check, pic_step, run_scenario, scenario_checks,
                             validate_compatible, validate_scenario)
from rvmlab.vmsolver.diagnostics import COLUMNS, eps_uniformity
from rvmlab.vmsolver.gyration import (GyrationConfig, GyroProfile, explicit_solution, printed_solution,
                                      simplified_gyration)
from rvmlab.vmsolver.pic import CFLViolation, boris_push, div_E, light_speed, poisson_E
from rvmlab.vmsolver.validators import SamplingBox, l2_norm_tensor


class TestYeeScheme:
    def test_grid_validation(self):
        with pytest.raises(ValueError):
            GridSpec(3, 0.5)
        with pytest.raises(ValueError):
            GridSpec(8, 0.0)

    def test_cfl(self):
        grid = GridSpec(8, 0.5)
        with pytest.raises(CFLViolation):
            init_state(grid, [[1.0, 1.0, 1.0]], [[0.0, 0.0, 0.0]], [1.0], grid.max_dt())

    @pytest.mark.parametrize("mode", [1, 2, 4])
    def test_numerical_dispersion(self, mode):
        """Oracle: sin(w dt / 2) / dt = sin(k dx / 2) / dx for waves along an axis."""
        grid, dt = GridSpec(32, 0.25), 0.1
        k = 2 * math.pi * mode / grid.length
        w = 2 / dt * math.asin(dt / grid.dx * math.sin(k * grid.dx / 2))
        assert light_speed(grid, dt, 200, mode) == pytest.approx(w / k, rel=1e-9)

    def test_poisson(self):
        rng = np.random.default_rng(1)
        rho = rng.normal(size=(8, 8, 8))
        rho -= rho.mean()
        assert np.allclose(div_E(poisson_E(rho, 0.3), 0.3), rho, atol=1e-10)

    @given(xi=arrays(np.float64, (4, 3), elements=st.floats(-5, 5)),
           B=arrays(np.float64, (3,), elements=st.floats(-5, 5)))
    def test_boris_magnetic_rotation_preserves_speed(self, xi, B):
        F = np.zeros((4, 6))
        F[:, 3:] = B
        out = xi.copy()
        boris_push(out, F, 0.1)
        assert np.allclose(np.linalg.norm(out, axis=1), np.linalg.norm(xi, axis=1), rtol=1e-12, atol=1e-12)

    def test_constraints_preserved(self):
        """Charge-conserving deposition keeps the Gauss law; the Yee curl keeps div B."""
        grid = GridSpec(8, 0.5)
        rng = np.random.default_rng(5)
        x = rng.uniform(0, grid.length, (200, 3))
        xi = rng.normal(scale=0.8, size=(200, 3))
        state = init_state(grid, x, xi, np.full(200, 0.01), 0.1, B_uniform=(0.0, 0.2, 0.5))
        for _ in range(30):
            pic_step(state)
        assert state.gauss_residual() < 1e-10
        assert state.div_B_residual() < 1e-12


class TestScenarioFiles:
    def test_packaged_configs_parse(self):
        text = resources.files("rvmlab.configs").joinpath("stationary.yaml").read_text()
        cfg = ScenarioConfig.from_yaml(text)
        assert cfg.cells == 8 and cfg.external_field == (0.0, 0.0, 0.5)

    @pytest.mark.parametrize("text,line,column", [
        ("name: a\ngrid: {cells: 8\n", 3, 1),
        ("name: a\ngrid:\n  cellz: 8\n", 3, 3),
        ("name: a\ntime:\n  dt: fast\n", 3, 3),
    ])
    def test_errors_name_position(self, text, line, column):
        with pytest.raises(ConfigError) as info:
            ScenarioConfig.from_yaml(text, "s.yaml")
        assert (info.value.line, info.value.column) == (line, column)
        assert str(info.value).startswith(f"s.yaml:{line}:{column}: ")

    def test_semantic_error(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_yaml("kind: hybrid\n")

    def test_hash_is_stable(self):
        assert default_prototype_config().hash() == default_prototype_config().hash()
        assert default_prototype_config().hash() != default_prototype_config(eps=0.25).hash()


def odd_family(eps):
    """Bump in x times xi_1 (1 - |xi|^2)^2: momentum support 1, zero marginal."""
    def f(x, xi):
        u = np.sum(xi * xi, axis=1)
        return eps * np.exp(-np.sum(x * x, axis=1)) * xi[:, 0] * np.where(u < 1, (1 - np.minimum(u, 1)) ** 2, 0)
    return f


class TestValidators:
    BOX = SamplingBox((-2, -2, -2), (2, 2, 2))

    def constants(self):
        return 1.0, 0.5, l2_norm_tensor(odd_family(1.0), self.BOX, 1.0) * 1.001

    def test_compatible_family_passes(self):
        P0, S0, N0 = self.constants()
        rep = validate_compatible(odd_family, P0, S0, N0, [1.0, 0.5, 0.1], self.BOX)
        assert rep.passed, rep.failed()

    @pytest.mark.parametrize("change,clause", [({"P0": 0.5}, "minimalradiusforf"), ({"S0": 1e-3}, "Lebesgue bounds"),
                                               ({"N0": 1e-3}, "absorptioforsm")])
    def test_constructed_violations(self, change, clause):
        P0, S0, N0 = self.constants()
        args = {"P0": P0, "S0": S0, "N0": N0, **change}
        rep = validate_compatible(odd_family, args["P0"], args["S0"], args["N0"], [0.5], self.BOX)
        assert clause in rep.failed()
        bad = rep.clause(clause)
        assert bad.value > bad.bound and bad.as_dict()["description"]

    def test_nonzero_marginal(self):
        def even(eps):
            return lambda x, xi: np.abs(odd_family(eps)(x, xi))
        P0, S0, N0 = self.constants()
        rep = validate_compatible(even, P0, S0, N0 * 10, [0.5], self.BOX)
        assert rep.failed() == ["compatibility conditions"]

    def test_prototype_scenario(self):
        rep = validate_scenario(default_prototype_config(eps=0.5))
        assert rep.passed, rep.failed()
        assert {c.name for c in rep.clauses} >= {"supppourUepsa", "minimalradiusforf", "absorptioforsm"}

    def test_coupled_support_violation(self):
        rep = validate_scenario(default_coupled_config(compatible={"P0": 0.5}))
        assert rep.failed() == ["minimalradiusforf"]


class TestDiagnostics:
    def series(self, EE, P=0.5, Q=None):
        s = DiagnosticsSeries()
        for i, e in enumerate(EE):
            row = dict.fromkeys(COLUMNS, 0.0)
            row.update(t=0.1 * i, EE=e, P_bound=P, Q=(Q[i] if Q is not None else 1.0))
            s.append(row)
        return s

    def test_gronwall_first_violation(self):
        eps, N0 = 0.5, 1.0
        s = self.series([0.25, 0.26, 10.0, 0.3])
        rep = gronwall_check(s, eps, N0)
        assert not rep["passed"] and rep["first_violation"] == pytest.approx(0.2)

    def test_gronwall_equality_at_start(self):
        rep = gronwall_check(self.series([0.25, 0.25]), 0.5, 1.0)
        assert rep["passed"] and rep["max_ratio"] == pytest.approx(1.0)

    def test_light_cone(self):
        assert light_cone_check(self.series([0, 0, 0], Q=[1.0, 1.1, 1.2]), 0.1)["passed"]
        assert not light_cone_check(self.series([0, 0, 0], Q=[1.0, 1.5, 1.2]), 0.1)["passed"]

    def test_eps_uniformity(self):
        rep = eps_uniformity({1.0: {"EE_over_eps2_max": 2.0}, 0.5: {"EE_over_eps2_max": 1.0}})
        assert rep["spread"] == 2.0


@pytest.fixture(scope="module")
def stationary_run():
    cfg = default_prototype_config(1.0, 0.0, cells=8, steps=10, snapshot_every=1)
    return run_scenario(cfg)


class TestRuns:
    def test_stationary_checks(self, stationary_run):
        rep = scenario_checks(stationary_run)
        assert rep["passed"], rep["checks"]
        assert len(stationary_run.series) == 11 and len(stationary_run.history.times) == 11

    def test_csv_columns(self, stationary_run, tmp_path):
        path = tmp_path / "d.csv"
        stationary_run.series.to_csv(path)
        assert path.read_text().splitlines()[0] == ",".join(COLUMNS)


class TestHistory:
    def test_round_trip(self, stationary_run, tmp_path):
        hist = stationary_run.history
        man = hist.save(tmp_path / "snaps", "abc")
        back = FieldHistory.load(man, required_times=hist.times[:3])
        x = np.array([[1.0, 1.3, 0.7], [2.2, 0.4, 3.1]])
        for t in (0.0, 0.125, 0.5):
            E0, B0 = hist.evaluate(t, x)
            E1, B1 = back.evaluate(t, x)
            assert np.array_equal(E0, E1) and np.array_equal(B0, B1)

    def test_linear_in_time(self):
        grid = GridSpec(4, 1.0)
        hist = FieldHistory(grid)
        hist.append(0.0, np.zeros((3, 4, 4, 4)), np.zeros((3, 4, 4, 4)))
        hist.append(1.0, np.ones((3, 4, 4, 4)), 2 * np.ones((3, 4, 4, 4)))
        E, B = hist.evaluate(0.25, [[0.3, 0.2, 0.1]])
        assert np.allclose(E, 0.25) and np.allclose(B, 0.5)
        with pytest.raises(ValueError):
            hist.append(0.5, np.zeros((3, 4, 4, 4)), np.zeros((3, 4, 4, 4)))

    def test_missing_file(self, stationary_run, tmp_path):
        man = stationary_run.history.save(tmp_path / "snaps")
        (tmp_path / "snaps" / "snap_00003.bin").unlink()
        with pytest.raises(MissingSnapshots) as info:
            FieldHistory.load(man)
        assert info.value.missing == [pytest.approx(0.15)]

    def test_missing_required_time(self, stationary_run, tmp_path):
        man = stationary_run.history.save(tmp_path / "snaps")
        with pytest.raises(MissingSnapshots) as info:
            FieldHistory.load(man, required_times=[0.5, 7.0])
        assert info.value.missing == [7.0]


class TestGyration:
    def test_explicit_at_time_zero(self):
        cfg = GyrationConfig(eps=0.2)
        x = np.array([[0.1, 0.2, 0.3]])
        xi = np.array([[0.4, -0.2, 0.1]])
        assert explicit_solution(cfg, 0.0, x, xi) == pytest.approx(cfg.initial(x, xi))

    @pytest.mark.parametrize("eps", [1.0, 0.1])
    def test_numeric_matches_explicit(self, eps):
        rep = simplified_gyration(GyrationConfig(eps=eps), 1.0)
        assert rep["max_error"] < 1e-8 and rep["max_change"] > 1e-2

    def test_isotropic_profile_is_stationary(self):
        """Rotations about e3 leave an isotropic momentum profile unchanged."""
        cfg = GyrationConfig(eps=0.1, profile=GyroProfile(isotropic=True))
        rep = simplified_gyration(cfg, 1.0)
        assert rep["max_change"] < 1e-14 and rep["printed_rate_deviation"] < 1e-14

    def test_printed_rate_differs_with_vertical_momentum(self):
        cfg = GyrationConfig(eps=0.1)
        x = np.zeros((1, 3))
        xi = np.array([[0.5, 0.0, 0.8]])
        assert abs(printed_solution(cfg, 1.0, x, xi) - explicit_solution(cfg, 1.0, x, xi))[0] > 1e-3
