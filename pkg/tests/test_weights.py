"""Kernel weights, their bounds, the Jacobian and the sphere average."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad

from rvmlab.kinematics import rel_velocity
from rvmlab.weights import (SingularContext, all_weights, bound_suite, jacobian_J, kernel_gradient,
                            pushforward_check, sphere_average_closed_form, sphere_weight_average, weight_W0,
                            weight_Wl, weight_Wn, weight_Wnb)

vec = arrays(np.float64, (3,), elements=st.floats(-1, 1))
units = vec.filter(lambda v: np.linalg.norm(v) > 0.1).map(lambda v: v / np.linalg.norm(v))
momenta = arrays(np.float64, (3,), elements=st.floats(-5, 5))
subluminal = vec.map(lambda v: 0.95 * v / max(1.0, float(np.linalg.norm(v))))


def kernel(omega, xi, nu_traj):
    v = rel_velocity(xi)
    return float(nu_traj @ (v + omega) / (1.0 + omega @ v))


class TestWeights:
    @given(omega=units, xi=momenta, nu_traj=subluminal)
    def test_gradient_matches_difference(self, omega, xi, nu_traj):
        """Oracle: central differences of the scalar kernel in each momentum direction."""
        h = 1e-6
        fd = np.array([(kernel(omega, xi + h * e, nu_traj) - kernel(omega, xi - h * e, nu_traj)) / (2 * h)
                       for e in np.eye(3)])
        g = kernel_gradient(omega, xi, nu_traj)
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-6 * (1 + np.abs(fd).max()))

    @given(omega=units, xi=momenta, nu_traj=subluminal, s=st.floats(0.0, 5.0))
    def test_time_dependence(self, omega, xi, nu_traj, s):
        """W0 is linear in s, Wl does not depend on it."""
        assert weight_W0(s, omega, xi, nu_traj) == pytest.approx(s * weight_W0(1.0, omega, xi, nu_traj),
                                                                   rel=1e-12, abs=1e-15)
        assert weight_Wl(s, omega, xi, nu_traj) == weight_Wl(0.0, omega, xi, nu_traj)

    @given(omega=units, xi=momenta, nu_traj=subluminal, lag=st.floats(0.0, 5.0))
    def test_force_weights(self, omega, xi, nu_traj, lag):
        wn = weight_Wn(lag + 1.0, 1.0, omega, xi, nu_traj)
        assert np.allclose(wn, -lag / (4 * math.pi) * kernel_gradient(omega, xi, nu_traj), atol=1e-15)
        wnb = weight_Wnb(lag + 1.0, 1.0, omega, xi, nu_traj)
        assert abs(float(wnb @ rel_velocity(xi))) <= 1e-12 * (1 + np.linalg.norm(wn))
        w = all_weights(lag + 1.0, 1.0, omega, xi, nu_traj)
        assert np.array_equal(w.Wn, w.Wne)

    def test_singular_context_rejected(self):
        omega = np.array([0.0, 0.0, 1.0])
        with pytest.raises(SingularContext):
            weight_Wl(0.0, omega, -1e9 * omega, np.zeros(3))


class TestJacobian:
    @given(omega=units, nu_traj=subluminal, r=st.floats(0.0, 2.0), lag=st.floats(0.0, 3.0))
    def test_nonnegative(self, omega, nu_traj, r, lag):
        assert jacobian_J(r, r + lag, omega, nu_traj) >= 0.0

    def test_requires_ordered_times(self):
        with pytest.raises(ValueError):
            jacobian_J(1.0, 0.5, np.array([0.0, 0.0, 1.0]), np.zeros(3))

    def test_pushforward_straight_path(self):
        """Constant-velocity path: Monte Carlo agrees with the ball integral within 5 standard errors."""
        v = np.array([0.5, -0.2, 0.3])

        def g(y):
            return np.exp(-np.sum((y - 0.3) ** 2, axis=1))

        rep = pushforward_check(lambda s: np.outer(s, v), lambda s: np.tile(v, (len(s), 1)), 0.2, 1.7, g,
                                samples=200_000, seed=4)
        assert abs(rep["monte_carlo"] - rep["direct"]) <= 5 * rep["stderr"]

    def test_pushforward_needs_forward_interval(self):
        with pytest.raises(ValueError):
            pushforward_check(None, None, 1.0, 1.0, None)


class TestBounds:
    def test_small_suite_has_no_violations(self):
        rep = bound_suite(20_000, seed=7)
        assert rep["passed"], rep["witness"]
        assert all(0.0 < v <= 1.0 + 1e-12 for v in rep["max_ratio"].values())

    def test_seed_reproducible(self):
        assert bound_suite(5_000, seed=2)["max_ratio"] == bound_suite(5_000, seed=2)["max_ratio"]

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            bound_suite(0)


class TestSphereAverage:
    @pytest.mark.parametrize("delta", [0.5, 1.0, 1.5, 2.0])
    @pytest.mark.parametrize("q", [0.05, 1.0, 6.0])
    def test_closed_form_against_adaptive_quadrature(self, delta, q):
        """Oracle: 2 pi times the integral over mu in [-1, 1] of (1 + v mu)^(-delta)."""
        v = q / math.sqrt(1 + q * q)
        ref, _ = quad(lambda mu: (1 + v * mu) ** (-delta), -1, 1, epsabs=0, epsrel=1e-13, limit=200)
        assert sphere_average_closed_form([0.0, q, 0.0], delta) == pytest.approx(2 * math.pi * ref, rel=1e-10)

    def test_rest_value(self):
        assert sphere_average_closed_form([0.0, 0.0, 0.0], 1.5) == 4 * math.pi

    @pytest.mark.parametrize("delta,regime", [(0.5, "bounded"), (1.0, "log"), (2.0, "power")])
    def test_regimes(self, delta, regime):
        rep = sphere_weight_average([1.0, 2.0, -2.0], delta)
        assert rep["regime"] == regime and rep["relative_error"] < 1e-8
