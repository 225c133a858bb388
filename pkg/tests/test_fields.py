"""External fields, equilibrium profiles, gridded data and the free-wave formula."""

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from rvmlab.fields import (ConstraintViolation, ExternalFieldConfig, GriddedField, InitialEM, InvalidSupport,
                           KirchhoffProvider, grid_from_function, kirchhoff_Eh, kirchhoff_spectral_check,
                           make_equilibrium, read_snapshot, rho_eps, spectral_curl, spectral_div, spectral_wave,
                           spherical_mean, vector_potential, write_snapshot)
from rvmlab.providers import OutOfDomainError
from rvmlab.quadrature import lebedev_by_points


def periodic_grid(n=16, length=2 * math.pi):
    h = length / n
    return (n,) * 3, (0.0,) * 3, (h,) * 3


class TestExternalField:
    @pytest.mark.parametrize("cfg", [
        ExternalFieldConfig("constant", (0.1, -0.2, 1.0)),
        ExternalFieldConfig("harmonic", (0.0, 0.0, 1.0), gradient=0.4, half_width=2.0),
        ExternalFieldConfig("sheared", (0.0, 0.0, 1.0), gradient=0.0),
    ])
    def test_consistent_kinds(self, cfg):
        rep = cfg.constraint_report()
        assert rep["consistent"] and rep["flag"] is None

    def test_sheared_flagged(self):
        rep = ExternalFieldConfig("sheared", (0.0, 0.0, 1.0), gradient=0.3).constraint_report()
        assert not rep["divergence_free"] and rep["flag"]

    def test_scaling(self):
        cfg = ExternalFieldConfig("constant", (0.0, 0.0, 2.0), epsilon=0.25)
        assert np.allclose(cfg.field([[0, 0, 0]]), [[0.0, 0.0, 8.0]])

    def test_harmonic_outside_domain(self):
        cfg = ExternalFieldConfig("harmonic", gradient=0.4, half_width=1.0)
        with pytest.raises(OutOfDomainError):
            cfg.profile([[1.5, 0.0, 0.0]])

    @pytest.mark.parametrize("kw", [{"kind": "twisted"}, {"epsilon": 0.0}, {"epsilon": 1.5}])
    def test_rejects_bad_config(self, kw):
        with pytest.raises(ValueError):
            ExternalFieldConfig(**kw)


class TestEquilibrium:
    @pytest.mark.parametrize("args", [(1.0, 1.2, 0.3), (1.0, 1.5, 0.0), (1.0, 0.9, -0.2)])
    def test_support_rejected(self, args):
        with pytest.raises(InvalidSupport):
            make_equilibrium(*args)

    def test_dense_condition(self):
        with pytest.raises(ValueError):
            make_equilibrium(-1.0, 2.0, 0.5)

    @pytest.mark.parametrize("shape,kw", [("core", {}), ("shell", {"r_min": 1.2})])
    def test_vanishes_beyond_support(self, shape, kw):
        prof = make_equilibrium(1.0, 2.0, 0.5, shape=shape, **kw)
        assert np.all(prof(0.3, np.array([2.0, 2.5, 10.0])) == 0.0)

    @given(r=st.floats(1.0, 2.5), eps=st.floats(0.0, 1.0))
    def test_derivative_matches_difference(self, r, eps):
        prof = make_equilibrium(1.3, 2.0, 0.5, eps_slope=0.5)
        h = 1e-6
        fd = (prof(eps, r + h) - prof(eps, r - h)) / (2 * h)
        # The second derivative jumps at the support edge, so allow O(h) there.
        assert float(prof.dr(eps, r)) == pytest.approx(float(fd), abs=1e-4)

    @pytest.mark.parametrize("shape,kw", [("core", {}), ("shell", {"r_min": 1.3})])
    def test_density_against_adaptive_quadrature(self, shape, kw):
        prof = make_equilibrium(0.8, 2.2, 0.5, shape=shape, eps_slope=0.2, **kw)
        ref, _ = quad(lambda q: 4 * math.pi * q * q * float(prof(0.5, math.sqrt(1 + q * q))),
                      0.0, prof.momentum_radius, epsabs=1e-13, limit=200,
                      points=[math.sqrt(prof.r_min ** 2 - 1.0)])
        val, err = rho_eps(prof, 0.5)
        assert val == pytest.approx(ref, rel=1e-10)
        assert err < 1e-8

    def test_lipschitz_bounds_gradient(self):
        prof = make_equilibrium(1.0, 2.0, 0.5)
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=(2, 500, 3))
        lhs = np.abs(prof.of_momentum(0.2, a) - prof.of_momentum(0.2, b))
        assert np.all(lhs <= prof.lipschitz_xi(0.2) * np.linalg.norm(a - b, axis=1) * (1 + 1e-3) + 1e-14)


class TestGriddedField:
    def test_fd4_and_spectral_derivatives(self):
        shape, origin, spacing = periodic_grid(32)
        g = grid_from_function(lambda x: np.sin(x[:, 0]) * np.cos(2 * x[:, 2]), shape, origin, spacing)
        exact = grid_from_function(lambda x: np.cos(x[:, 0]) * np.cos(2 * x[:, 2]), shape, origin, spacing)
        assert np.max(np.abs(g.derivative(0, "spectral").data - exact.data)) < 1e-12
        assert np.max(np.abs(g.derivative(0, "fd4").data - exact.data)) < 1e-4

    def test_nonperiodic_margin_is_nan(self):
        g = grid_from_function(lambda x: x[:, 0], (8, 8, 8), (0, 0, 0), (1, 1, 1), periodic=False)
        d = g.derivative(0)
        assert np.all(np.isnan(d.data[0, :2])) and np.allclose(d.data[0, 2:-2], 1.0)
        with pytest.raises(ValueError):
            g.derivative(0, "spectral")

    def test_interpolates_linear_data_exactly(self):
        g = grid_from_function(lambda x: 2 * x[:, 0] - x[:, 1] + 0.5 * x[:, 2], (12, 12, 12), (0, 0, 0),
                               (0.5, 0.5, 0.5), periodic=False)
        x = np.array([[2.1, 2.7, 3.3], [2.9, 3.05, 2.2]])
        assert np.allclose(g.evaluate(x)[:, 0], 2 * x[:, 0] - x[:, 1] + 0.5 * x[:, 2], atol=1e-12)

    def test_snapshot_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        g = GriddedField(rng.normal(size=(3, 4, 5, 6)), (0.5, -1.0, 2.0), (0.1, 0.2, 0.3), time=1.25)
        path = tmp_path / "snap.bin"
        write_snapshot(path, g)
        back = read_snapshot(path)
        assert np.array_equal(back.data, g.data)
        assert back.origin == g.origin and back.spacing == g.spacing and back.time == 1.25
        assert path.read_bytes()[:4] == b"RVMS"

    def test_snapshot_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"XXXX" + bytes(200))
        with pytest.raises(ValueError):
            read_snapshot(path)


class TestSpectralTools:
    def test_plane_wave(self):
        """cos(k.x) with zero velocity evolves to cos(k.x) cos(|k| t)."""
        shape, origin, spacing = periodic_grid(16)
        x = grid_from_function(lambda p: p, shape, origin, spacing).data
        k = np.array([1.0, 2.0, -1.0])
        u0 = np.cos(np.tensordot(k, x, 1))
        u = spectral_wave(u0, np.zeros_like(u0), spacing, 0.7)
        assert np.allclose(u, u0 * math.cos(np.linalg.norm(k) * 0.7), atol=1e-12)

    def test_velocity_data(self):
        shape, origin, spacing = periodic_grid(16)
        x = grid_from_function(lambda p: p, shape, origin, spacing).data
        v0 = np.sin(x[1]) + 0.5
        u = spectral_wave(np.zeros_like(v0), v0, spacing, 1.3)
        assert np.allclose(u, np.sin(x[1]) * math.sin(1.3) + 0.5 * 1.3, atol=1e-12)

    def test_vector_potential_recovers_field(self):
        shape, origin, spacing = periodic_grid(16)
        x = grid_from_function(lambda p: p, shape, origin, spacing).data
        A0 = np.stack([np.sin(x[1]), np.cos(x[2]) * np.sin(x[0]), np.cos(x[0] + x[1])])
        B = spectral_curl(A0, spacing)
        A = vector_potential(B, spacing)
        assert np.allclose(spectral_curl(A, spacing), B, atol=1e-11)
        assert np.max(np.abs(spectral_div(A, spacing))) < 1e-11

    def test_vector_potential_rejects_divergent_data(self):
        shape, origin, spacing = periodic_grid(16)
        x = grid_from_function(lambda p: p, shape, origin, spacing).data
        B = np.stack([np.sin(x[0]), np.zeros_like(x[0]), np.zeros_like(x[0])])
        with pytest.raises(ConstraintViolation):
            vector_potential(B, spacing)


def plane_wave_data(k=1.0):
    """E0 = (0, cos(k x1), 0), B0 = 0: the free wave is cos(k x1) cos(k t) e2."""
    def E0(x):
        x = np.atleast_2d(x)
        return np.stack([0 * x[:, 0], np.cos(k * x[:, 0]), 0 * x[:, 0]], axis=1)

    def grad(x):
        x = np.atleast_2d(x)
        g = np.zeros((x.shape[0], 3, 3))
        g[:, 1, 0] = -k * np.sin(k * x[:, 0])
        return g

    zero = InitialEM.zero()
    return InitialEM(E0, zero.B0, grad, zero.curl_B0)


class TestKirchhoff:
    @given(x=st.lists(st.floats(-3, 3), min_size=3, max_size=3), t=st.floats(0.0, 2.0))
    def test_spherical_mean_of_square(self, x, t):
        """Mean of |y|^2 over the sphere of radius t about x is |x|^2 + t^2."""
        x = np.array([x])
        m = spherical_mean(lambda y: np.sum(y * y, axis=1), t, x)
        assert m[0] == pytest.approx(float(x[0] @ x[0]) + t * t, rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("t", [0.0, 0.4, 1.5])
    def test_plane_wave(self, t):
        init = plane_wave_data(1.3)
        x = np.array([[0.2, -0.4, 1.0], [2.0, 0.0, 0.0]])
        E = kirchhoff_Eh(init, t, x, lebedev_by_points(590))
        expect = np.cos(1.3 * x[:, 0]) * math.cos(1.3 * t)
        assert np.allclose(E[:, 1], expect, atol=1e-12) and np.allclose(E[:, [0, 2]], 0.0, atol=1e-14)

    def test_provider_has_no_magnetic_part(self):
        E, B = KirchhoffProvider(plane_wave_data()).evaluate(0.5, [[0.0, 0.0, 0.0]])
        assert np.all(B == 0.0) and E.shape == (1, 3)

    def test_spectral_reference_resolved(self):
        rep = kirchhoff_spectral_check(cells=48, method="spectral", probes=8)
        assert rep["relative_error"] < 1e-2

    def test_under_resolved_grid_detected(self):
        rep = kirchhoff_spectral_check(cells=16, method="fd4", probes=8)
        assert rep["relative_error"] > 1e-3
