import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from cutofflab import (
    CurvatureProfile,
    DomainError,
    ModelManifold,
    RadialGrid,
    bishop_gromov_ratio_check,
    laplacian_comparison,
    solve_warping,
    volume_ball,
    volume_table,
)
from cutofflab.geometry import LogDerivative, sphere_area

GOLDEN = (1 + math.sqrt(5)) / 2


def euclidean_ball(d, R=1.0):
    return math.pi ** (d / 2) / gamma_fn(d / 2 + 1) * R**d


class TestCurvatureProfile:
    def test_standard_formula(self):
        p = CurvatureProfile.standard(1.5, 1.0)
        r = np.array([0.0, 0.5, 3.0, 10.0])
        assert np.allclose(p(r), 2.25 / np.sqrt(1 + r**2), rtol=0, atol=1e-15)

    def test_alpha_out_of_range(self):
        with pytest.raises(ValueError, match="alpha"):
            CurvatureProfile.standard(1.0, 2.5)

    def test_negative_kappa(self):
        with pytest.raises(ValueError):
            CurvatureProfile.standard(-1.0, 0.0)

    def test_power_tail_domain(self):
        p = CurvatureProfile.power_tail(1.0, 1.0, 4.0)
        assert p(3.0) == pytest.approx(1.0)
        with pytest.raises(DomainError):
            p(4.0)

    def test_tabulated_keeps_sign_and_order(self):
        r = np.linspace(0, 5, 11)
        low = CurvatureProfile.tabulated(r, np.exp(-r))
        high = CurvatureProfile.tabulated(r, np.exp(-r) + 0.1)
        x = np.linspace(0, 5, 301)
        assert np.all(low(x) >= 0)
        assert low.dominated_by(high, x)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            RadialGrid(np.array([0.0, 1.0, 0.5] + list(range(2, 20))))


class TestWarping:
    def test_flat_is_identity(self):
        grid = RadialGrid.uniform(10.0, 500)
        w = solve_warping(CurvatureProfile.constant(0.0), grid)
        assert np.max(np.abs(w.h - grid.nodes)) <= 1e-10 * 10
        assert np.max(np.abs(w.h_prime - 1.0)) <= 1e-10

    @pytest.mark.parametrize("r", [1.0, 5.0, 10.0])
    def test_unit_curvature_is_sinh(self, r):
        w = solve_warping(CurvatureProfile.constant(1.0), RadialGrid.uniform(10.0, 1000))
        h, hp = w.evaluate(r)
        assert h == pytest.approx(math.sinh(r), rel=1e-8)
        assert hp == pytest.approx(math.cosh(r), rel=1e-8)

    def test_initial_conditions(self):
        w = solve_warping(CurvatureProfile.standard(2.0, -1.0), RadialGrid.uniform(3.0, 300))
        assert w.h[0] == 0.0 and w.h_prime[0] == 1.0

    def test_grid_beyond_profile_domain(self):
        with pytest.raises(DomainError):
            solve_warping(CurvatureProfile.power_tail(1.0, 1.0, 2.0), RadialGrid.uniform(3.0, 100))

    def test_power_rate_for_inverse_square_decay(self):
        # h / t^golden peaks at t = 1 and decreases, so h(t) <= h(1) t^golden on t >= 1
        w = solve_warping(CurvatureProfile.standard(1.0, 2.0), RadialGrid.uniform(50.0, 5000))
        m = w.r >= 1.0
        ratio = w.h[m] / w.r[m] ** GOLDEN
        assert np.all(np.diff(ratio) <= 1e-12)
        assert ratio[0] == pytest.approx(w.evaluate(1.0)[0])

    def test_refinement_order(self):
        prof = CurvatureProfile.standard(1.0, 0.0)
        ends = [solve_warping(prof, RadialGrid.uniform(4.0, n), fixed_step=True).h[-1] for n in (20, 40, 80)]
        order = math.log2(abs(ends[0] - ends[1]) / abs(ends[1] - ends[2]))
        assert order >= 4.0

    @settings(max_examples=25, deadline=None)
    @given(kappa=st.floats(0.0, 2.0), alpha=st.floats(-2.0, 2.0))
    def test_nonnegative_curvature_properties(self, kappa, alpha):
        w = solve_warping(CurvatureProfile.standard(kappa, alpha), RadialGrid.uniform(3.0, 120))
        assert np.all(w.h >= w.r - 1e-12)
        assert np.all(w.h_prime >= 1.0 - 1e-12)
        assert np.all(np.diff(w.h_prime) >= -1e-12)  # convexity


class TestLogDerivative:
    def test_matches_warping(self):
        prof = CurvatureProfile.standard(1.0, 1.0)
        q = LogDerivative(prof, 40.0)
        w = solve_warping(prof, RadialGrid.uniform(40.0, 8000))
        r = np.array([0.5, 1.5, 2.5, 10.0, 30.0])
        assert np.allclose(q(r), w.log_derivative(r), rtol=1e-10, atol=0)

    def test_survives_overflowing_warping(self):
        # h grows like exp(c r^1.5) here and overflows long before r = 400
        q = LogDerivative(CurvatureProfile.standard(1.0, -1.0), 400.0)
        vals = q(np.array([100.0, 400.0]))
        assert np.all(np.isfinite(vals))
        # Riccati equilibrium q ~ sqrt(G) far out
        assert vals[-1] == pytest.approx(math.sqrt(math.sqrt(1 + 400.0**2)), rel=1e-2)


class TestVolume:
    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_flat_ball(self, d):
        w = solve_warping(CurvatureProfile.constant(0.0), RadialGrid.uniform(2.0, 200))
        assert volume_ball(w, d, 1.0) == pytest.approx(euclidean_ball(d), rel=1e-10)

    @pytest.mark.parametrize("d", [2, 3, 5])
    def test_flat_homogeneity(self, d):
        w = solve_warping(CurvatureProfile.constant(0.0), RadialGrid.uniform(4.0, 400))
        assert volume_ball(w, d, 2.0) / volume_ball(w, d, 1.0) == pytest.approx(2.0**d, rel=1e-12)

    def test_hyperbolic_plane_disc(self):
        w = solve_warping(CurvatureProfile.constant(1.0), RadialGrid.uniform(2.0, 400))
        assert volume_ball(w, 2, 1.0) == pytest.approx(2 * math.pi * (math.cosh(1.0) - 1.0), rel=1e-10)

    def test_quadrature_oracle_curved(self):
        prof = CurvatureProfile.standard(1.0, 1.0)
        w = solve_warping(prof, RadialGrid.uniform(3.0, 600))
        ref = sphere_area(3) * quad(lambda t: w.evaluate(t)[0] ** 2, 0, 2.5, epsabs=0, epsrel=1e-13)[0]
        assert volume_ball(w, 3, 2.5) == pytest.approx(ref, rel=1e-9)

    def test_beyond_grid(self):
        w = solve_warping(CurvatureProfile.constant(0.0), RadialGrid.uniform(2.0, 100))
        with pytest.raises(ValueError):
            volume_ball(w, 3, 3.0)

    def test_table_csv_and_small_radius_limit(self):
        w = solve_warping(CurvatureProfile.constant(1.0), RadialGrid.uniform(2.0, 400))
        table = volume_table(w, 3, [1e-3, 0.5, 1.0, 2.0])
        assert table.strictly_increasing()
        assert table.ratio[0] == pytest.approx(1.0, abs=1e-6)
        assert table.to_csv().splitlines()[0] == "R,V_G,ratio"

    def test_manifold_wrapper(self):
        w = solve_warping(CurvatureProfile.constant(0.0), RadialGrid.uniform(2.0, 200))
        man = ModelManifold(w, 3)
        assert man.volume(1.0) == pytest.approx(4 * math.pi / 3, rel=1e-10)


class TestLaplacianComparison:
    def test_flat(self):
        w = solve_warping(CurvatureProfile.constant(0.0), RadialGrid.uniform(4.0, 400))
        assert laplacian_comparison(w, 3, 2.0) == pytest.approx(1.0, rel=1e-12)

    def test_hyperbolic_plane(self):
        w = solve_warping(CurvatureProfile.constant(1.0), RadialGrid.uniform(2.0, 400))
        assert laplacian_comparison(w, 2, 1.0) == pytest.approx(1 / math.tanh(1.0), rel=1e-9)

    def test_inverse_square_decay_bound(self):
        w = solve_warping(CurvatureProfile.standard(1.0, 2.0), RadialGrid.uniform(50.0, 5000))
        r = w.r[w.r >= 1.0]
        assert np.all(laplacian_comparison(w, 3, r) <= 2 * GOLDEN / r)

    def test_singular_at_pole(self):
        w = solve_warping(CurvatureProfile.constant(0.0), RadialGrid.uniform(2.0, 100))
        with pytest.raises(ValueError):
            laplacian_comparison(w, 3, 0.0)


class TestBishopGromov:
    def test_flat_against_hyperbolic_closed_form(self):
        rep = bishop_gromov_ratio_check(
            CurvatureProfile.constant(0.0), CurvatureProfile.constant(1.0), 3, [1, 2, 4, 8]
        )
        radii = np.array([1.0, 2.0, 4.0, 8.0])
        exact = (4 * math.pi * radii**3 / 3) / (math.pi * (np.sinh(2 * radii) - 2 * radii))
        assert np.allclose(rep.ratios, exact, rtol=1e-8)
        assert np.all(np.diff(rep.ratios) < 0)
        assert rep.nonincreasing and rep.precondition_ok

    def test_identity(self):
        p = CurvatureProfile.standard(1.0, 1.0)
        rep = bishop_gromov_ratio_check(p, p, 3, [1, 2, 3])
        assert np.allclose(rep.ratios, 1.0, atol=1e-14)

    def test_decaying_against_constant(self):
        rep = bishop_gromov_ratio_check(CurvatureProfile.standard(1, 2), CurvatureProfile.constant(1.0), 3, [1, 2, 4])
        assert rep.nonincreasing and rep.precondition_ok

    def test_unordered_profiles_are_reported(self):
        rep = bishop_gromov_ratio_check(CurvatureProfile.constant(1.0), CurvatureProfile.constant(0.0), 3, [1, 2])
        assert not rep.precondition_ok
        assert rep.first_precondition_violation == 0.0
