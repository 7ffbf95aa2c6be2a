import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from cutofflab import bessel_iv_kv
from cutofflab.bessel import bessel_iv_kv_derivatives


class TestHalfIntegerOrder:
    @pytest.mark.parametrize("z", [0.01, 0.7, 3.0, 25.0])
    def test_order_one_half(self, z):
        i, k = bessel_iv_kv(0.5, z)
        assert i == pytest.approx(math.sqrt(2 / (math.pi * z)) * math.sinh(z), rel=1e-12)
        assert k == pytest.approx(math.sqrt(math.pi / (2 * z)) * math.exp(-z), rel=1e-12)

    @pytest.mark.parametrize("z", [0.3, 2.0, 12.0])
    def test_order_three_halves(self, z):
        i, k = bessel_iv_kv(1.5, z)
        i_ref = math.sqrt(2 / (math.pi * z)) * (math.cosh(z) - math.sinh(z) / z)
        k_ref = math.sqrt(math.pi / (2 * z)) * math.exp(-z) * (1 + 1 / z)
        assert i == pytest.approx(i_ref, rel=1e-11)
        assert k == pytest.approx(k_ref, rel=1e-12)


class TestAgainstReferences:
    @pytest.mark.parametrize("nu", [0.25, 1 / 3, 0.5, 2 / 3, 1.0, 4 / 3])
    @pytest.mark.parametrize("z", [1e-3, 0.5, 1.9, 2.1, 8.0, 40.0, 300.0])
    def test_scipy(self, nu, z):
        i, k = bessel_iv_kv(nu, z, scaled=True)
        assert i == pytest.approx(special.ive(nu, z), rel=1e-12)
        assert k == pytest.approx(special.kve(nu, z), rel=1e-12)

    @pytest.mark.parametrize("nu,z", [(0.4, 0.05), (0.75, 5.5), (1.2, 60.0), (2.5, 1.0)])
    def test_mpmath(self, nu, z):
        mpmath.mp.dps = 30
        i, k = bessel_iv_kv(nu, z)
        assert i == pytest.approx(float(mpmath.besseli(nu, z)), rel=1e-12)
        assert k == pytest.approx(float(mpmath.besselk(nu, z)), rel=1e-12)

    def test_large_argument_switches_to_scaled(self):
        pair = bessel_iv_kv(0.5, np.array([10.0, 900.0]))
        assert pair.scaled
        assert np.allclose(pair.i, special.ive(0.5, [10.0, 900.0]), rtol=1e-12)

    def test_domain(self):
        with pytest.raises(ValueError):
            bessel_iv_kv(0.5, 0.0)
        with pytest.raises(ValueError):
            bessel_iv_kv(0.0, 1.0)


class TestIdentities:
    @settings(max_examples=60, deadline=None)
    @given(nu=st.floats(0.05, 2.0), z=st.floats(1e-2, 500.0))
    def test_wronskian(self, nu, z):
        pair, di, dk = bessel_iv_kv_derivatives(nu, z, scaled=True)
        # scaled factors cancel in I K' - I' K
        assert z * (pair.i * dk - di * pair.k) == pytest.approx(-1.0, rel=1e-11)

    @settings(max_examples=40, deadline=None)
    @given(nu=st.floats(0.05, 1.9), z=st.floats(0.05, 100.0))
    def test_recurrence(self, nu, z):
        lo, hi = bessel_iv_kv(nu, z, scaled=True), bessel_iv_kv(nu + 1, z, scaled=True)
        # K_{nu+1} - K_{nu-1} = (2 nu / z) K_nu, checked with K_{nu-1} = K_{1-nu}
        if nu < 1:
            kminus = bessel_iv_kv(1 - nu, z, scaled=True).k
            assert hi.k - kminus == pytest.approx(2 * nu / z * lo.k, rel=1e-10, abs=1e-300)
