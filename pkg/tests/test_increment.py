"""Momentum-increment engine: terms, budgets, rules and envelopes."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rvmlab.fields import make_equilibrium
from rvmlab.increment import (AnalyticSolution, BlowUpError, MemoizedDensity, NonSmoothProvider, QuadratureSpec,
                              SolutionProvider, TruncationError, bihari_envelope, compare_increment,
                              compute_breakdown, cross_term_split, fit_exponential_envelope, ode_increment,
                              quartic_blow_up_time, quartic_envelope_numeric, stratified_ball,
                              support_bound_from_increment)
from rvmlab.kinematics import IntegratorSpec, PhasePoint, integrate_characteristic
from rvmlab.providers import UniformFields

PROFILE = make_equilibrium(1.0, 2.0, 0.5)
B = np.array([0.0, 0.0, 2.0])
E = np.array([0.1, 0.2, 0.0])
SPEC = QuadratureSpec(6, 26, (6, 6, 6))


def uniform(vec, scale=1.0):
    return lambda t, x: np.tile(scale * vec, (np.atleast_2d(x).shape[0], 1))


@pytest.fixture(scope="module")
def trajectory():
    seed = PhasePoint([0.1, 0.2, 0.3], [0.9 * PROFILE.momentum_radius, 0.0, 0.1])
    return integrate_characteristic(seed, UniformFields(np.zeros(3), B), 0.0, 1.0, IntegratorSpec(step=0.01))


@pytest.fixture(scope="module")
def equilibrium(trajectory):
    """Isotropic profile in a uniform magnetic field: a stationary solution."""
    return AnalyticSolution(trajectory, lambda x, xi: PROFILE.of_momentum(0.5, xi), B_fn=uniform(B),
                            P_fn=PROFILE.momentum_radius)


def anisotropic(x, xi):
    return PROFILE.of_momentum(0.5, xi) * (1 + 0.3 * xi[:, 0]) * np.exp(-0.1 * np.sum(x * x, axis=1))


class TestStationaryNull:
    def test_every_term_vanishes(self, equilibrium):
        rep = compare_increment(equilibrium, 1.0, SPEC)
        bd = rep["breakdown"]
        for term in bd.TERMS:
            assert abs(getattr(bd, term)) <= max(bd.errors[term], 1e-14)
        assert abs(rep["D_ode"]) < 1e-10
        assert rep["within_budget"]

    def test_provider_protocol(self, equilibrium):
        assert isinstance(equilibrium, SolutionProvider)

    def test_breakdown_json(self, equilibrium, tmp_path):
        bd = compute_breakdown(equilibrium, 0.5, SPEC)
        path = tmp_path / "bd.json"
        text = bd.to_json(path)
        data = json.loads(path.read_text())
        assert data == json.loads(text)
        assert set(data["terms"]) == set(bd.TERMS) and data["node_counts"]["sphere_points"] == 26

    def test_support_bound(self, equilibrium):
        bd = compute_breakdown(equilibrium, 0.5, SPEC)
        assert support_bound_from_increment(1.5, bd) == pytest.approx(2.5 + bd.absolute_total)


class TestGuards:
    def test_nonsmooth_rejected(self, trajectory):
        prov = AnalyticSolution(trajectory, lambda x, xi: PROFILE.of_momentum(0.5, xi), smooth=False)
        with pytest.raises(NonSmoothProvider):
            compute_breakdown(prov, 0.5, SPEC)

    def test_truncated_momentum_rule(self, equilibrium):
        spec = QuadratureSpec(6, 26, (6, 6, 6), xi_radius=0.5 * PROFILE.momentum_radius)
        with pytest.raises(TruncationError):
            compute_breakdown(equilibrium, 0.5, spec)

    @pytest.mark.parametrize("kw", [{"time_nodes": 1}, {"sphere_points": 27}, {"xi_nodes": (4, 4, 5)},
                                    {"xi_mode": "sobol"}, {"mc_samples": 0}])
    def test_spec_validation(self, kw):
        with pytest.raises(ValueError):
            QuadratureSpec(**kw)

    def test_coarse_and_refined(self):
        spec = QuadratureSpec(16, 110, (8, 8, 8))
        assert spec.coarse().time_nodes == 8 and spec.coarse().sphere_points <= 55
        assert spec.refined().time_nodes == 32 and spec.refined().sphere_points >= 220


class TestBilinearity:
    def test_cross_blocks_sum_to_full_force_term(self, trajectory):
        """Splitting both force and density must reproduce the unsplit force terms."""
        full = AnalyticSolution(trajectory, anisotropic, E_fn=uniform(E), B_fn=uniform(B),
                                P_fn=PROFILE.momentum_radius)
        a = AnalyticSolution(trajectory, lambda x, xi: 0.3 * anisotropic(x, xi), E_fn=uniform(E, 0.25),
                             B_fn=uniform(B, 0.5), P_fn=PROFILE.momentum_radius)
        p = AnalyticSolution(trajectory, lambda x, xi: 0.7 * anisotropic(x, xi), E_fn=uniform(E, 0.75),
                             B_fn=uniform(B, 0.5), P_fn=PROFILE.momentum_radius)
        bd = compute_breakdown(full, 1.0, SPEC)
        blocks = cross_term_split(a, p, 1.0, SPEC)
        assert len(blocks) == 4
        assert sum(b["Dne"].value for b in blocks.values()) == pytest.approx(bd.Dne, rel=1e-12)
        assert sum(b["Dnb"].value for b in blocks.values()) == pytest.approx(bd.Dnb, rel=1e-12)
        assert abs(bd.Dne) > 1e-3 and abs(bd.Dnb) > 1e-3


class TestRulesAndCache:
    def test_ode_increment_uniform_electric(self):
        """From rest in E e1 the energy gain is sqrt(1 + (E t)^2) - 1."""
        traj = integrate_characteristic(PhasePoint([0, 0, 0], [0, 0, 0]), UniformFields(E=(0.5, 0, 0)),
                                        0.0, 2.0, IntegratorSpec(step=0.01))
        assert ode_increment(traj, 2.0) == pytest.approx(math.sqrt(2.0) - 1.0, abs=1e-10)

    @given(pairs=st.integers(1, 2000), seed=st.integers(0, 100))
    def test_stratified_ball(self, pairs, seed):
        rule = stratified_ball(1.5, pairs, seed)
        assert rule.weights.sum() == pytest.approx(4 / 3 * math.pi * 1.5 ** 3, rel=1e-12)
        assert np.all(np.linalg.norm(rule.points, axis=1) <= 1.5 + 1e-12)
        assert np.allclose(rule.weights @ rule.points, 0.0, atol=1e-12)

    def test_memoized_density(self):
        calls = []

        def f(t, x, xi):
            calls.append(len(x))
            return x[:, 0] + xi[:, 1] + t

        cache = MemoizedDensity(f)
        x = np.array([[1.0, 0, 0], [2.0, 0, 0]])
        xi = np.array([[0, 1.0, 0], [0, 3.0, 0]])
        first = cache(0.5, x, xi)
        second = cache(0.5, x, xi)
        assert np.array_equal(first, [2.5, 5.5]) and np.array_equal(first, second)
        assert calls == [2] and cache.hits == 2 and cache.misses == 2


class TestEnvelopes:
    @given(I0=st.floats(0.1, 2.0), C=st.floats(0.01, 1.0), frac=st.floats(0.0, 0.9))
    def test_quartic_solves_ode(self, I0, C, frac):
        """Oracle: finite difference of the closed form against C y^4."""
        t = frac * quartic_blow_up_time(I0, C)
        h = 1e-6 * quartic_blow_up_time(I0, C)
        y = bihari_envelope(I0, 0.0, t, "quartic", C)
        dy = (bihari_envelope(I0, 0.0, t + h, "quartic", C) - bihari_envelope(I0, 0.0, max(t - h, 0), "quartic", C))
        dy /= (t + h) - max(t - h, 0)
        assert dy == pytest.approx(C * y ** 4, rel=1e-4)

    def test_numeric_matches_closed_form(self):
        assert quartic_envelope_numeric(1.0, 0.1, 2.0) == pytest.approx(
            bihari_envelope(1.0, 0.0, 2.0, "quartic", 0.1), rel=1e-10)

    def test_blow_up(self):
        with pytest.raises(BlowUpError) as info:
            bihari_envelope(1.0, 0.0, 10.0, "quartic", 0.1)
        assert info.value.blow_up_time == pytest.approx(1 / 0.3)
        with pytest.raises(BlowUpError):
            quartic_envelope_numeric(1.0, 0.1, 10.0)

    @pytest.mark.parametrize("kw", [{"beta": -1.0}, {"mode": "linear"}, {"mode": "quartic"}])
    def test_bad_arguments(self, kw):
        args = {"I0": 1.0, "beta": 0.1, "t": 1.0}
        args.update(kw)
        with pytest.raises(ValueError):
            bihari_envelope(**args)

    @given(values=st.lists(st.floats(0.1, 100.0), min_size=2, max_size=20))
    def test_fitted_envelope_covers_samples(self, values):
        times = np.linspace(0.0, 3.0, len(values))
        I0, beta = fit_exponential_envelope(times, values)
        env = np.array([bihari_envelope(I0, beta, t) for t in times])
        assert np.all(env >= np.asarray(values) * (1 - 1e-12))
