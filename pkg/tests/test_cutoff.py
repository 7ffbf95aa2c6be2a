import json
import math

import numpy as np
import pytest

from cutofflab import build_cutoff_alpha2, build_cutoff_general, build_sequence, solve_exhaustion
from cutofflab.cutoff import (
    CutoffError,
    alpha2_exponent,
    alpha2_theta,
    alpha2_theta_function,
    sweep_summary,
)

RADII = (1.0, 2.0, 4.0, 8.0, 16.0)


@pytest.fixture(scope="module")
def exh_flat():
    return solve_exhaustion(0.0, 0.0, 3, 32.0)


@pytest.fixture(scope="module")
def exh_alpha1():
    return solve_exhaustion(1.0, 1.0, 3, 32.0)


class TestExhaustion:
    def test_linear_growth_flat(self, exh_flat):
        assert exh_flat.growth_exponent() == pytest.approx(1.0, abs=0.05)

    def test_square_root_growth(self, exh_alpha1):
        assert exh_alpha1.growth_exponent() == pytest.approx(0.5, abs=0.05)

    def test_laplacian_rate(self, exh_alpha1):
        e = exh_alpha1
        m = (e.r >= 2.0) & (e.r <= e.r_max / 4)
        scaled = np.abs(e.laplacian[m]) * e.r[m] ** e.alpha
        assert scaled.max() <= 1.1 * scaled.min()

    def test_identity_outside_unit_ball(self, exh_alpha1):
        # r_ex = -log(omega) turns the linear equation into Lap r_ex = |grad r_ex|^2 - f
        assert np.max(np.abs(exh_alpha1.identity_residual())) < 1e-6

    def test_omega_in_unit_interval_and_monotone(self, exh_alpha1):
        om = exh_alpha1.omega
        assert np.all((om > 0) & (om <= 1 + 1e-14))
        outside = exh_alpha1.outside()
        assert np.all(np.diff(exh_alpha1.value[outside]) > 0)

    def test_sandwich(self, exh_flat, exh_alpha1):
        assert exh_flat.sandwich_ok() and exh_alpha1.sandwich_ok()

    def test_larger_coefficient_grows_faster(self):
        lo = solve_exhaustion(1.0, 1.0, 3, 16.0, C=8.0)
        hi = solve_exhaustion(1.0, 1.0, 3, 16.0, C=16.0)
        assert np.all(-hi.log_omega >= -lo.log_omega - 1e-12)

    def test_finite_difference_and_riccati_agree(self):
        fd = solve_exhaustion(0.5, 1.0, 3, 16.0, C=8.0, method="fd")
        ric = solve_exhaustion(0.5, 1.0, 3, 16.0, C=8.0, method="riccati")
        m = fd.outside()
        rel = np.abs(fd.log_omega[m] - ric.log_omega[m]) / np.maximum(1.0, np.abs(fd.log_omega[m]))
        assert rel.max() < 1e-6

    def test_level_radius(self, exh_flat):
        with pytest.raises(CutoffError):
            exh_flat.level_radius(exh_flat.value[-1] * 2)
        lvl = float(exh_flat.value[exh_flat.r == 4.0][0])
        assert exh_flat.level_radius(lvl) == pytest.approx(4.0, abs=1e-9)


class TestGeneralCutoff:
    def test_definition_properties(self, exh_alpha1):
        for R in RADII:
            cut = build_cutoff_general(1.0, 1.0, 3, R, 2.0, exh_alpha1)
            assert cut.in_unit_interval() and cut.plateau_ok() and cut.support_ok()

    def test_rates_along_sweep(self, exh_alpha1):
        cuts = [build_cutoff_general(1.0, 1.0, 3, R, 2.0, exh_alpha1) for R in RADII]
        grad = np.array([c.sup_grad * c.R for c in cuts])
        lap = np.array([c.sup_lap * c.R**1.5 for c in cuts])
        assert grad.max() / grad.min() < 4 and lap.max() / lap.min() < 4
        sups = [c.sup_grad for c in cuts]
        assert all(b < a for a, b in zip(sups, sups[1:]))  # sup |grad phi_R| -> 0

    def test_threshold(self, exh_alpha1):
        beta = 0.5
        threshold = (exh_alpha1.D[1] / exh_alpha1.D[0]) ** (1 / beta)
        with pytest.raises(CutoffError, match="threshold"):
            build_cutoff_general(1.0, 1.0, 3, 1.0, threshold * 0.999, exh_alpha1)

    def test_mismatched_profile(self, exh_flat):
        with pytest.raises(CutoffError):
            build_cutoff_general(1.0, 1.0, 3, 1.0, 2.0, exh_flat)

    def test_csv_and_summary_keys(self, exh_alpha1):
        cut = build_cutoff_general(1.0, 1.0, 3, 2.0, 2.0, exh_alpha1)
        assert cut.to_csv().splitlines()[0] == "r,phi,dphi,lap_phi"
        rec = sweep_summary([cut])[0]
        assert set(rec) == {"R", "sup_grad", "sup_lap", "c1_fit", "c2_fit"}
        json.dumps(rec)


class TestAlpha2:
    def test_exponent(self):
        assert alpha2_exponent(1.0, 3) == pytest.approx(1 + math.sqrt(5))

    @pytest.mark.parametrize("R", [1.0, 10.0, 100.0])
    def test_boundary_values_and_decrease(self, R):
        ann, _ = build_cutoff_alpha2(1.0, 3, R, 1.5, n=400)
        assert ann.u(R) == pytest.approx(1.0, abs=1e-12)
        assert ann.u(1.5 * R) == pytest.approx(0.0, abs=1e-12)
        r = np.linspace(R, 1.5 * R, 1001)
        assert np.all(ann.u_prime(r) < 0)

    def test_theta_independent_of_radius(self):
        t1 = alpha2_theta(1.0, 3, 2.0, R=1.0)[0]
        t100 = alpha2_theta(1.0, 3, 2.0, R=100.0)[0]
        assert abs(t1 - t100) <= 1e-10
        a = alpha2_exponent(1.0, 3)
        h = alpha2_theta_function(a, 2.0)
        assert h(t1) == pytest.approx(1 / (16 * 2.0 ** (a + 1) * (a + 1)), rel=1e-10)

    def test_sandwich_and_scale_invariant_laplacian(self):
        scaled = []
        for R in (1.0, 2.0, 4.0, 8.0, 16.0, 32.0):
            ann, cut = build_cutoff_alpha2(1.0, 3, R, 2.0, n=400)
            assert ann.sandwich_slack >= -1e-9 and ann.maximum_principle_ok()
            assert cut.plateau_ok() and cut.support_ok() and cut.in_unit_interval()
            scaled.append(cut.sup_lap * R**2)
        assert max(scaled) / min(scaled) < 2.0

    def test_flat_exact_scaling(self):
        _, c1 = build_cutoff_alpha2(0.0, 3, 1.0, 1.5, n=400)
        _, c4 = build_cutoff_alpha2(0.0, 3, 4.0, 1.5, n=400)
        assert c4.sup_grad * 4 == pytest.approx(c1.sup_grad, rel=1e-6)
        assert c4.sup_lap * 16 == pytest.approx(c1.sup_lap, rel=1e-6)

    def test_rejects_bad_gamma(self):
        with pytest.raises(CutoffError):
            build_cutoff_alpha2(1.0, 3, 1.0, 1.0)


class TestSequence:
    def test_nested_with_ratio_rule(self, exh_flat):
        seq = build_sequence(exh_flat, 4)
        assert seq.nested() and seq.ratios_ok()

    def test_flat_gradient_rate(self):
        exh = solve_exhaustion(0.0, 1.0, 3, 64.0)
        seq = build_sequence(exh, 5)
        n = np.arange(1, 6)
        prod = seq.sup_grads * n
        assert prod.max() / prod.min() < 8
        assert seq.nonincreasing_from_second()

    def test_domain_too_short(self, exh_flat):
        with pytest.raises(CutoffError, match="enlarge"):
            build_sequence(exh_flat, 40)
