import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutofflab import (
    CurvatureProfile,
    PoissonProblem,
    compute_bounds,
    solve_radial_poisson,
    verify_gradient_estimate,
)
from cutofflab.gradient import bump_constant

FLAT = CurvatureProfile.constant(0.0)


def dense_bump_constant(t):
    # independent oracle: sample the quintic step and its derivatives directly
    u = np.linspace(0.0, 1.0, 2_000_001)[1:-1]
    S = (1 - u) ** 3 * (1 + 3 * u + 6 * u**2)
    d1 = -30 * u**2 * (1 - u) ** 2
    d2 = -(60 * u - 180 * u**2 + 120 * u**3)
    return max(np.max(np.abs(d1) / np.sqrt(S)) / t, np.max(np.abs(d2)) / t**2)


def harmonic_problem(R0, R1, gamma, t):
    return PoissonProblem(
        f1=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        f1_prime=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        f2=lambda w: np.ones_like(w),
        f2_prime=lambda w: np.zeros_like(w),
        R0=R0, R1=R1, gamma=gamma, t=t, kind="constant", coeff=0.0,
    )


class TestBumpConstant:
    def test_quarter_band(self):
        assert bump_constant(0.25) == pytest.approx(92.376, abs=5e-4)
        assert bump_constant(0.25) == pytest.approx(dense_bump_constant(0.25), rel=1e-9)

    @settings(max_examples=20, deadline=None)
    @given(t=st.floats(0.01, 0.9))
    def test_monotone_in_band_width(self, t):
        assert bump_constant(t / 2) > bump_constant(t)

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            bump_constant(0.0)


class TestRadialPoisson:
    def test_harmonic_closed_form(self):
        p = harmonic_problem(1.0, 2.0, 2.0, 0.25)
        outer = 6.0
        sol = solve_radial_poisson(p, FLAT, 3, outer=outer, boundary=(1.0, 0.0), n=2000)
        exact = (1 / sol.r - 1 / outer) / (1 - 1 / outer)
        assert np.max(np.abs(sol.omega - exact)) < 1e-6

    def test_constant_source_closed_form(self):
        # Lap w = c in flat 3-space: w = c r^2 / 6 + a / r + b
        c, R0, outer = 0.1, 1.0, 6.0
        base = PoissonProblem.constant_source(0.0, 2.0, 2.0, 0.25, R0=R0)
        p = PoissonProblem(base.f1, base.f1_prime, base.f2, base.f2_prime, R0, 2.0, 2.0, 0.25, "constant", c)
        sol = solve_radial_poisson(p, FLAT, 3, outer=outer, boundary=(1.0, 1.0), n=2000)
        M = np.array([[1 / R0, 1.0], [1 / outer, 1.0]])
        a, b = np.linalg.solve(M, [1.0 - c * R0**2 / 6, 1.0 - c * outer**2 / 6])
        exact = c * sol.r**2 / 6 + a / sol.r + b
        assert np.max(np.abs(sol.omega - exact)) < 1e-6

    def test_second_order_self_convergence(self):
        p = PoissonProblem.linear_reaction(1.0, 4.0, 2.0, 0.25)
        prof = CurvatureProfile.standard(1.0, 1.0)
        ref = solve_radial_poisson(p, prof, 3, n=6400)
        errs = []
        for n in (400, 800):
            sol = solve_radial_poisson(p, prof, 3, n=n)
            errs.append(np.max(np.abs(sol.omega - ref.omega[:: 6400 // n])))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)

    def test_decaying_condition_needs_linear(self):
        p = PoissonProblem.constant_source(0.0, 2.0, 2.0, 0.25)
        with pytest.raises(ValueError):
            solve_radial_poisson(p, FLAT, 3)

    def test_admissible_band(self):
        with pytest.raises(ValueError, match="admissible"):
            PoissonProblem.linear_reaction(1.0, 2.0, 2.0, 0.5, R0=1.2)


class TestBounds:
    def test_flat_has_no_curvature_term(self):
        p = PoissonProblem.linear_reaction(0.0, 4.0, 2.0, 0.25)
        b = compute_bounds(p, solve_radial_poisson(p, FLAT, 3), 3, FLAT)
        assert b.omega2_terms["curvature"] == 0.0
        assert b.g_bar == 0.0

    def test_harmonic_check_passes(self):
        p = harmonic_problem(1.0, 2.0, 2.0, 0.25)
        sol = solve_radial_poisson(p, FLAT, 3, outer=6.0, boundary=(1.0, 0.0), n=2000)
        rep = verify_gradient_estimate(p, sol, compute_bounds(p, sol, 3, FLAT))
        r = sol.r[(sol.r > 2.0) & (sol.r < 4.0)]
        lhs = (1 / r**2 / (1 / r - 1 / 6.0)) ** 2
        assert rep.ok
        assert rep.sup_lhs == pytest.approx(lhs.max(), rel=1e-4)

    def test_lambda_is_grid_minimizer(self):
        p = PoissonProblem.linear_reaction(1.0, 4.0, 2.0, 0.25)
        prof = CurvatureProfile.standard(1.0, 1.0)
        b = compute_bounds(p, solve_radial_poisson(p, prof, 3), 3, prof)
        assert b.B == min(B for _, B in b.by_lambda)
        assert b.lam in [lam for lam, _ in b.by_lambda]

    def test_omega2_partial_rates(self):
        prof = CurvatureProfile.standard(1.0, 1.0)
        p = PoissonProblem.linear_reaction(1.0, 8.0, 2.0, 0.25)
        b = compute_bounds(p, solve_radial_poisson(p, prof, 3), 3, prof, lambdas=(1 / 3,))
        terms = b.omega2_terms
        assert terms["bump_gradient"] == pytest.approx((2 + 12) * b.a1 / 64)
        assert terms["curvature"] == pytest.approx(4 * b.g_bar)
        assert b.omega2 == pytest.approx(sum(terms.values()))

    def test_shrinking_band_grows_bound(self):
        prof = CurvatureProfile.standard(1.0, 1.0)
        Bs = []
        for t in (0.4, 0.2, 0.1, 0.05):
            p = PoissonProblem.linear_reaction(1.0, 4.0, 2.0, t, R0=1.0)
            Bs.append(compute_bounds(p, solve_radial_poisson(p, prof, 3), 3, prof).B)
        assert all(b > a for a, b in zip(Bs, Bs[1:]))


class TestVerification:
    def test_scaling_sweep_linear(self):
        prof = CurvatureProfile.standard(1.0, 1.0)
        scaled = []
        for R1 in (2.0, 4.0, 8.0):
            p = PoissonProblem.linear_reaction(1.0, R1, 2.0, 0.25)
            sol = solve_radial_poisson(p, prof, 3)
            rep = verify_gradient_estimate(p, sol, compute_bounds(p, sol, 3, prof))
            assert rep.ok
            scaled.append(rep.sup_lhs * R1)
        assert max(scaled) / min(scaled) < 4

    def test_constant_source_case(self):
        prof = CurvatureProfile.standard(1.0, 2.0)
        p = PoissonProblem.constant_source(2.0, 4.0, 2.0, 0.25)
        sol = solve_radial_poisson(p, prof, 3, boundary=(1.0, 0.0), lift_to=1.0)
        rep = verify_gradient_estimate(p, sol, compute_bounds(p, sol, 3, prof))
        assert rep.ok

    def test_report_keys(self):
        p = PoissonProblem.linear_reaction(0.0, 4.0, 2.0, 0.25)
        sol = solve_radial_poisson(p, FLAT, 3)
        doc = json.loads(verify_gradient_estimate(p, sol, compute_bounds(p, sol, 3, FLAT)).to_json())
        assert set(doc) == {"R1", "gamma", "t", "lambda", "Omega1", "Omega2", "Omega3", "B", "sup_lhs", "margin_min"}
        assert math.isfinite(doc["B"])
