import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutofflab import (
    CurvatureProfile,
    RadialGrid,
    bessel_iv_kv,
    closed_form_psi,
    sturm_compare,
    sturm_pair,
    volume_lowerbound_chain,
)
from cutofflab.bessel import bessel_iv_kv_derivatives
from cutofflab.comparison import chain_sweep, indicial_exponents, numeric_psi

GOLDEN = (1 + math.sqrt(5)) / 2


class TestBesselOracle:
    def test_order_one_at_two_against_extended_series(self):
        # independent oracle: 40-term ascending series and the integral form of K
        mpmath.mp.dps = 30
        nu, z = mpmath.mpf(1), mpmath.mpf(2)
        i_ref = sum((z / 2) ** (2 * k + nu) / (mpmath.factorial(k) * mpmath.gamma(k + nu + 1)) for k in range(40))
        k_ref = mpmath.quad(lambda t: mpmath.exp(-z * mpmath.cosh(t)) * mpmath.cosh(nu * t), [0, 1, 3, 8])
        i, k = bessel_iv_kv(1.0, 2.0)
        assert i == pytest.approx(float(i_ref), rel=1e-10)
        assert k == pytest.approx(float(k_ref), rel=1e-10)

    def test_wronskian_example(self):
        pair, di, dk = bessel_iv_kv_derivatives(0.5, 1.0)
        assert pair.i * dk - di * pair.k == pytest.approx(-1.0, abs=1e-9)


class TestClosedFormPsi:
    def test_flat_power_case_is_identity(self):
        cf = closed_form_psi(0.0, 2.0, 5.0)
        s = np.linspace(0, 4.9, 50)
        assert np.allclose(cf(s), s, rtol=0, atol=1e-14)

    def test_power_coefficients(self):
        cf = closed_form_psi(1.0, 2.0, 10.0)
        root = math.sqrt(5)
        assert cf.c1 == pytest.approx(-(10 ** ((1 - root) / 2)) / root)
        assert cf.c2 == pytest.approx(10 ** ((1 + root) / 2) / root)

    def test_power_endpoint_bound(self):
        r = 10.0
        cf = closed_form_psi(1.0, 2.0, r)
        exact = (r**GOLDEN - r ** (1 - GOLDEN)) / math.sqrt(5)
        assert cf(r - 1) == pytest.approx(exact, rel=1e-12)
        assert cf(r - 1) <= r ** (1 + math.sqrt(5)) / math.sqrt(5)
        assert cf.endpoint_bound() == pytest.approx(r ** (1 + math.sqrt(5)) / math.sqrt(5))

    @pytest.mark.parametrize("kappa,alpha,r", [(1.0, 2.0, 6.0), (1.0, 1.0, 4.0), (0.7, 0.0, 3.0), (2.0, 1.5, 5.0), (1.0, -1.0, 3.0)])
    def test_initial_conditions_and_monotone(self, kappa, alpha, r):
        cf = closed_form_psi(kappa, alpha, r)
        psi, dpsi, _ = cf.evaluate(0.0)
        assert abs(psi) <= 1e-8 and dpsi == pytest.approx(1.0, abs=1e-8)
        s = np.linspace(0, 0.95 * r, 400)
        assert np.all(cf.derivative(s) > 0)

    @pytest.mark.parametrize("kappa,alpha,r", [(1.0, 2.0, 6.0), (1.0, 1.0, 4.0), (0.7, 0.0, 3.0), (1.3, 0.4, 7.0)])
    def test_ode_residual(self, kappa, alpha, r):
        cf = closed_form_psi(kappa, alpha, r)
        s = np.linspace(0, 0.9 * r, 300)
        _, _, dd = cf.evaluate(s)
        assert np.all(cf.ode_residual(s) <= 1e-6 * (1 + np.abs(dd)))

    def test_bessel_case_matches_integration(self):
        r = 4.0
        cf = closed_form_psi(1.0, 1.0, r)
        nodes = np.linspace(0, 0.9 * r, 721)
        num = numeric_psi(1.0, 1.0, r, nodes)
        assert np.allclose(cf(nodes[1:]), num.h[1:], rtol=1e-6, atol=0)

    def test_power_log_derivative_near_origin(self):
        cf = closed_form_psi(1.0, 2.0, 8.0)
        s = 1e-6
        assert cf.derivative(s) / cf(s) == pytest.approx(1 / s, rel=1e-5)

    def test_alpha_range(self):
        with pytest.raises(ValueError):
            closed_form_psi(1.0, 2.5, 3.0)

    def test_indicial_exponents(self):
        assert indicial_exponents(1.0) == pytest.approx((GOLDEN, 1 - GOLDEN))
        assert indicial_exponents(0.0) == (1.0, 0.0)


class TestHyperbolicBarrier:
    """The cosh/sinh expression for alpha < 0 is a barrier, not a solution.

    Its curvature at the origin is negative while every solution of the
    comparison problem has psi''(0) = 0, so it starts below the solution.
    """

    def test_flagged_inexact(self):
        assert not closed_form_psi(1.0, -1.0, 3.0).exact

    def test_curvature_at_origin(self):
        r = 2.0
        _, _, dd = closed_form_psi(1.0, -1.0, r).evaluate(0.0)
        assert dd == pytest.approx(-1.0 / (2 * (1 + r)), rel=1e-10)

    def test_lies_below_solution_near_origin(self):
        r = 2.0
        nodes = np.linspace(0, 0.5, 101)
        num = numeric_psi(1.0, -1.0, r, nodes)
        barrier = closed_form_psi(1.0, -1.0, r)(nodes[1:])
        assert np.all(barrier < num.h[1:])

    def test_solves_shifted_problem_residual(self):
        # the barrier satisfies psi'' >= kappa^2 (1+r-s)^(-alpha) psi only up to the drift term
        cf = closed_form_psi(1.0, -1.0, 3.0)
        psi, _, dd = cf.evaluate(np.linspace(0.1, 2.5, 50))
        assert np.all(np.isfinite(psi)) and np.all(np.isfinite(dd))


class TestSturm:
    def test_flat_against_hyperbolic(self):
        grid = RadialGrid.uniform(5.0, 500)
        rep = sturm_compare(sturm_pair(CurvatureProfile.constant(0.0), CurvatureProfile.constant(1.0), grid))
        assert rep.ok and rep.coefficients_ordered and rep.first_violation is None
        r = grid.nodes[1:]
        assert np.all(r <= np.sinh(r)) and np.all(1 / r <= 1 / np.tanh(r))

    def test_identity(self):
        p = CurvatureProfile.standard(1.0, 1.0)
        rep = sturm_compare(sturm_pair(p, p, RadialGrid.uniform(4.0, 200)))
        assert rep.ok
        assert rep.max_value_excess == pytest.approx(0.0, abs=1e-15)

    def test_standard_against_power_tail(self):
        r0 = 10.0
        grid = RadialGrid.uniform(0.9 * r0, 900)
        pair = sturm_pair(CurvatureProfile.standard(1.0, 2.0, center=r0), CurvatureProfile.power_tail(1.0, 2.0, r0), grid)
        rep = sturm_compare(pair)
        assert rep.coefficients_ordered and rep.ok

    def test_reversed_order_reports_violation(self):
        grid = RadialGrid.uniform(3.0, 300)
        rep = sturm_compare(sturm_pair(CurvatureProfile.constant(1.0), CurvatureProfile.constant(0.0), grid))
        assert not rep.ok
        assert rep.first_violation is not None and rep.first_violation > 0

    def test_slopes_validated(self):
        with pytest.raises(ValueError):
            sturm_pair(CurvatureProfile.constant(0.0), CurvatureProfile.constant(0.0), RadialGrid.uniform(1.0, 20), 2.0, 1.0)

    @settings(max_examples=15, deadline=None)
    @given(height=st.floats(0.0, 3.0), centre=st.floats(0.5, 3.5))
    def test_bump_on_larger_profile_keeps_order(self, height, centre):
        r = np.linspace(0, 4, 81)
        base = 1 / (1 + r**2)
        low = CurvatureProfile.tabulated(r, base)
        high = CurvatureProfile.tabulated(r, base + height * np.exp(-((r - centre) ** 2)))
        rep = sturm_compare(sturm_pair(low, high, RadialGrid.uniform(4.0, 200)))
        assert rep.ok


class TestVolumeChain:
    def test_flat(self):
        rec = volume_lowerbound_chain(0.0, 1.0, 3, 4.0)
        assert rec.integral == pytest.approx(4.0**3 / 3, rel=1e-10)
        assert rec.bound_ok

    def test_power_growth_exponent(self):
        rep = chain_sweep(1.0, 2.0, 3)
        assert rep.all_bounds_ok
        assert rep.fitted_exponent <= (1 + 2 * GOLDEN) * 1.05

    def test_stretched_exponential_rate(self):
        rep = chain_sweep(1.0, 1.0, 3)
        assert rep.all_bounds_ok
        assert rep.fitted_exponent == pytest.approx(0.5, abs=0.1)
        radii = np.array([rec.r_x for rec in rep.records])
        env = rep.c3_fit * radii ** (1 + 2 * 1.0 / 4) * np.exp(rep.c4_fit * radii**0.5)
        assert np.all([rec.integral for rec in rep.records] <= env * (1 + 1e-12))

    def test_negative_alpha_chain(self):
        assert chain_sweep(1.0, -1.0, 3, radii=(2.0, 4.0, 8.0)).all_bounds_ok

    def test_json_keys(self):
        rep = chain_sweep(0.0, 1.0, 3, radii=(2.0, 4.0))
        assert set(rep.to_json()[0]) == {"r_x", "integral", "fitted_exponent", "bound_ok"}
        assert rep.fitted_exponent == pytest.approx(3.0, abs=1e-6)

    def test_rejects_small_centre(self):
        with pytest.raises(ValueError):
            volume_lowerbound_chain(1.0, 1.0, 3, 0.5)
