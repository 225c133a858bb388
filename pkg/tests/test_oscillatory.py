"""Oscillatory sphere integrals and the trace identity."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rvmlab.oscillatory import (RegularizationSchedule, TraceIdentityCase, damped_rho_kernel,
                                damped_rho_kernel_numeric, default_trace_corpus, gaussian_bump, heaviside,
                                sphere_gradient_identity, sphere_identity, trace_identity, trace_rhs)
from rvmlab.quadrature import lebedev, product_sphere

RULE = lebedev(47)


def ones(w):
    return np.ones(w.shape[0])


@st.composite
def resolved_arguments(draw):
    """Radius, rho and tau with rho |X| at most 18, inside the resolution margin of degree 47."""
    R = draw(st.floats(0.5, 2.0))
    rho = draw(st.floats(0.0, 18.0)) / R
    direction = np.array(draw(st.lists(st.floats(-1, 1), min_size=3, max_size=3)))
    if np.linalg.norm(direction) < 0.1:
        direction = np.array([0.0, 0.0, 1.0])
    X = R * direction / np.linalg.norm(direction)
    return X, rho, draw(st.floats(-2.0, 2.0))


class TestSphereIdentities:
    @given(args=resolved_arguments())
    def test_value_identity(self, args):
        X, rho, tau = args
        assert sphere_identity(X, rho, tau, RULE)["error"] < 1e-8

    @given(args=resolved_arguments(), nu=st.lists(st.floats(-0.9, 0.9), min_size=3, max_size=3))
    def test_gradient_identity(self, args, nu):
        X, rho, tau = args
        assert sphere_gradient_identity(X, np.array(nu), rho, tau, RULE)["error"] < 1e-8

    def test_low_degree_fails_at_high_frequency(self):
        assert sphere_identity([0.0, 0.0, 1.0], 20.0, 0.0, lebedev(11))["error"] > 1e-3

    def test_origin_rejected(self):
        with pytest.raises(ValueError):
            sphere_identity([0.0, 0.0, 0.0], 1.0, 0.0)


class TestHelpers:
    @pytest.mark.parametrize("x,expected", [(-1.0, 0.0), (0.0, 0.5), (2.0, 1.0)])
    def test_heaviside(self, x, expected):
        assert heaviside(x) == expected

    @given(u=st.floats(-1.0, 1.0), delta=st.sampled_from([0.05, 0.1, 0.3]))
    @settings(max_examples=20)
    def test_damped_kernel(self, u, delta):
        num = damped_rho_kernel_numeric(u, delta)[0]
        assert num == pytest.approx(float(damped_rho_kernel(u, delta)), rel=1e-10, abs=1e-10)

    @pytest.mark.parametrize("deltas", [(0.1,), (0.1, 0.2), (0.2, -0.1), (0.2, 0.2)])
    def test_schedule_validation(self, deltas):
        with pytest.raises(ValueError):
            RegularizationSchedule(deltas)

    def test_schedule_halved(self):
        assert RegularizationSchedule((0.4, 0.2, 0.1)).halved().deltas == (0.2, 0.1, 0.05)

    @pytest.mark.parametrize("kw", [{"alpha": 2.5}, {"sign": 0}])
    def test_case_validation(self, kw):
        base = dict(X=(0, 0, 0), alpha=1.0, tau=0.0, sign=1, K=ones, f=gaussian_bump((0, 0, 0), 1.0))
        base.update(kw)
        with pytest.raises(ValueError):
            TraceIdentityCase(**base)


class TestTraceIdentity:
    @pytest.mark.parametrize("sign,tau,factor", [(1, -0.5, 1.0), (-1, 0.5, 1.0), (1, 0.0, 0.5), (1, 0.5, 0.0)])
    def test_trace_closed_form(self, sign, tau, factor):
        """Bump centred at X with K = 1 and alpha = 2: 8 pi^2 H exp(-tau^2 / 2 sigma^2)."""
        sigma = 0.7
        case = TraceIdentityCase((0.1, 0.2, 0.3), 2.0, tau, sign, ones, gaussian_bump((0.1, 0.2, 0.3), sigma))
        expected = 8 * math.pi ** 2 * factor * math.exp(-tau * tau / (2 * sigma ** 2))
        assert trace_rhs(case, product_sphere(20, 40)) == pytest.approx(expected, rel=1e-12, abs=1e-14)

    @pytest.mark.parametrize("index", [0, 1, 2, 9, 22, 47, 71])
    def test_corpus_case(self, index):
        case = default_trace_corpus()[index]
        res = trace_identity(case)
        assert res.relative_error < 1e-3
        assert res.stability["stable"]

    def test_corpus_covers_half_maximum(self):
        corpus = default_trace_corpus()
        assert any(c.tau == 0.0 for c in corpus) and {c.alpha for c in corpus} == {1.0, 2.0}
