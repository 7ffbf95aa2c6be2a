import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cutofflab import SmoothStep, smooth_step


class TestSmoothStep:
    def test_endpoints_and_flat_regions(self):
        step = smooth_step(1.0, 3.0)
        assert step(0.0) == 1.0 and step(1.0) == 1.0
        assert step(3.0) == 0.0 and step(9.0) == 0.0
        assert step(2.0) == pytest.approx(0.5)

    def test_rising_mirror(self):
        down, up = smooth_step(0, 2), smooth_step(0, 2, rising=True)
        x = np.linspace(-1, 3, 41)
        assert np.allclose(down(x) + up(x), 1.0)

    def test_quintic_bounds(self):
        step = smooth_step(0.0, 2.0)
        assert step.sup_first == pytest.approx(15 / 16, rel=1e-14)
        assert step.sup_second == pytest.approx(10 / (math.sqrt(3) * 4), rel=1e-14)

    def test_bounds_dominate_samples(self):
        step = smooth_step(0.3, 1.1)
        x = np.linspace(0.3, 1.1, 20001)
        d1, d2 = np.abs(step.derivative(x)), np.abs(step.derivative(x, 2))
        assert d1.max() <= step.sup_first * (1 + 1e-12)
        assert d2.max() <= step.sup_second * (1 + 1e-12)
        assert (d1 + d2).max() <= step.sup_sum * (1 + 1e-12)
        assert (d1 + d2).max() >= step.sup_sum * (1 - 1e-6)

    def test_c2_at_knots(self):
        step = smooth_step(0.0, 1.0)
        for knot, inward in ((0.0, 1.0), (1.0, -1.0)):
            for order in (1, 2):
                assert abs(step.derivative(knot + inward * 1e-9, order)) < 1e-6
                assert step.derivative(knot - inward * 1e-9, order) == 0.0

    @settings(max_examples=40, deadline=None)
    @given(a=st.floats(-5, 5), width=st.floats(0.1, 10), scale=st.floats(0.2, 5))
    def test_derivative_scaling(self, a, width, scale):
        s1, s2 = SmoothStep(a, a + width), SmoothStep(a, a + scale * width)
        assert s2.sup_first == pytest.approx(s1.sup_first / scale, rel=1e-12)
        assert s2.sup_second == pytest.approx(s1.sup_second / scale**2, rel=1e-12)

    def test_target_enforced(self):
        with pytest.raises(ValueError, match="exceeds target"):
            smooth_step(0.0, 0.1, a_target=1.0)
        assert smooth_step(0.0, 10.0, a_target=1.0).sup_sum <= 1.0

    def test_degenerate_interval(self):
        with pytest.raises(ValueError):
            SmoothStep(1.0, 1.0)

    def test_degree_seven_is_also_c2(self):
        step = smooth_step(0.0, 1.0, degree=7)
        assert abs(step.derivative(1e-6, 2)) < 1e-6
        assert step(0.5) == pytest.approx(0.5)
