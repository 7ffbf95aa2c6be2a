"""Modified Bessel functions ``I_nu`` and ``K_nu`` for orders in ``(0, 3]``.

Branches
--------
* ``I_nu``, ``z < 40``: ascending power series.
* ``K_nu``, ``z <= 2``: Temme's series for ``K_mu, K_mu+1`` with
  ``|mu| <= 1/2``, then upward recurrence in the order.
* ``K_nu``, ``2 < z < 25``: Steed's continued fraction (CF2), same recurrence.
* ``I_nu`` for ``z >= 40`` and ``K_nu`` for ``z >= 25``: Hankel asymptotic
  expansions truncated at the smallest term.  The truncation error is about
  ``exp(-2z)``, so the switch points keep it below rounding.

Everything is computed in scaled form ``(exp(-z) I, exp(z) K)`` and unscaled
on request.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BesselPair",
    "bessel_iv_kv",
    "bessel_iv_kv_derivatives",
    "I_CROSSOVER",
    "K_CROSSOVER",
    "OVERFLOW_THRESHOLD",
]

I_CROSSOVER = 40.0
K_CROSSOVER = 25.0
OVERFLOW_THRESHOLD = 700.0
_EPS = 1e-17

# Taylor coefficients of 1/Gamma(1+x) about 0 (40-digit arithmetic, rounded).
_RGAMMA1P = (
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
    1.4123806553180317816e-18,
    -2.2987456844353702066e-19,
)


def _temme_gammas(mu: float):
    """Return gam1, gam2, 1/Gamma(1+mu), 1/Gamma(1-mu) for ``|mu| <= 1/2``.

    ``gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)`` is the odd part of the
    Taylor series divided by ``-mu``; ``gam2`` is the even part.
    """
    m2 = mu * mu
    gam1 = 0.0
    gam2 = 0.0
    for k in range(len(_RGAMMA1P) - 1, -1, -1):
        if k % 2:
            gam1 = gam1 * m2 - _RGAMMA1P[k]
        else:
            gam2 = gam2 * m2 + _RGAMMA1P[k]
    gampl = gam2 - mu * gam1
    gammi = gam2 + mu * gam1
    return gam1, gam2, gampl, gammi


def _k_scaled_low(mu: float, x: float):
    """Temme's series: ``exp(x) K_mu(x)`` and ``exp(x) K_mu+1(x)`` for ``x <= 2``."""
    x2 = 0.5 * x
    pimu = math.pi * mu
    fact = 1.0 if abs(pimu) < 1e-300 else pimu / math.sin(pimu)
    d = -math.log(x2)
    e = mu * d
    fact2 = 1.0 if abs(e) < 1e-300 else math.sinh(e) / e
    gam1, gam2, gampl, gammi = _temme_gammas(mu)
    ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
    total = ff
    ee = math.exp(e)
    p = 0.5 * ee / gampl
    q = 0.5 / (ee * gammi)
    c = 1.0
    dd = x2 * x2
    total1 = p
    for i in range(1, 200):
        ff = (i * ff + p + q) / (i * i - mu * mu)
        c *= dd / i
        p /= i - mu
        q /= i + mu
        delta = c * ff
        total += delta
        delta1 = c * (p - i * ff)
        total1 += delta1
        if abs(delta) < abs(total) * _EPS:
            break
    scale = math.exp(x)
    return total * scale, total1 * (2.0 / x) * scale


def _k_scaled_cf2(mu: float, x: float):
    """Steed's CF2: ``exp(x) K_mu(x)`` and ``exp(x) K_mu+1(x)`` for ``x > 2``."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25 - mu * mu
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 100000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1 = q2
        q2 = qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < _EPS:
            break
    h = a1 * h
    kmu = math.sqrt(math.pi / (2.0 * x)) / s
    k1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, k1


def _k_scaled_mid(nu: float, x: float) -> float:
    """Scaled ``K_nu`` for ``x < K_CROSSOVER`` through the order recurrence."""
    nl = int(math.floor(nu + 0.5))
    mu = nu - nl
    kmu, k1 = _k_scaled_low(mu, x) if x <= 2.0 else _k_scaled_cf2(mu, x)
    for i in range(1, nl + 1):
        kmu, k1 = k1, (mu + i) * (2.0 / x) * k1 + kmu
    return kmu


def _i_series(nu: float, z: np.ndarray) -> np.ndarray:
    """Unscaled ascending series for ``I_nu``."""
    half = 0.5 * z
    term = half**nu / math.gamma(nu + 1.0)
    total = term.copy()
    q = half * half
    for k in range(1, 400):
        term = term * q / (k * (k + nu))
        total += term
        if np.all(term <= _EPS * total):
            break
    return total


def _hankel_coefficients(nu: float, n: int) -> np.ndarray:
    mu = 4.0 * nu * nu
    a = np.empty(n)
    a[0] = 1.0
    for k in range(1, n):
        a[k] = a[k - 1] * (mu - (2 * k - 1) ** 2) / (k * 8.0)
    return a


def _asymptotic_scaled(nu: float, z: np.ndarray):
    """Hankel expansions for ``exp(-z) I_nu`` and ``exp(z) K_nu``."""
    n = 80
    a = _hankel_coefficients(nu, n)
    sum_i = np.zeros_like(z)
    sum_k = np.zeros_like(z)
    prev = np.full_like(z, np.inf)
    live = np.ones(z.shape, dtype=bool)
    zinv = 1.0 / z
    power = np.ones_like(z)
    for k in range(n):
        term = a[k] * power
        mag = np.abs(term)
        live &= mag < prev
        # stop at the smallest term: later terms of a divergent series hurt
        sum_k = np.where(live, sum_k + term, sum_k)
        sum_i = np.where(live, sum_i + (term if k % 2 == 0 else -term), sum_i)
        live &= mag > _EPS * np.abs(sum_k)
        prev = mag
        power = power * zinv
        if not live.any():
            break
    i_scaled = sum_i / np.sqrt(2.0 * math.pi * z)
    k_scaled = sum_k * np.sqrt(math.pi / (2.0 * z))
    return i_scaled, k_scaled


def _scaled_pair(nu: float, z: np.ndarray):
    i_s = np.empty_like(z)
    k_s = np.empty_like(z)
    i_low = z < I_CROSSOVER
    k_low = z < K_CROSSOVER
    if i_low.any():
        zl = z[i_low]
        i_s[i_low] = _i_series(nu, zl) * np.exp(-zl)
    if k_low.any():
        k_s[k_low] = [_k_scaled_mid(nu, float(x)) for x in z[k_low]]
    high = ~(i_low & k_low)
    if high.any():
        i_a, k_a = _asymptotic_scaled(nu, z[high])
        i_s[high & ~i_low] = i_a[~i_low[high]]
        k_s[high & ~k_low] = k_a[~k_low[high]]
    return i_s, k_s


@dataclass(frozen=True, eq=False)
class BesselPair:
    """``(I_nu(z), K_nu(z))``; when ``scaled`` the values are
    ``(exp(-z) I_nu(z), exp(z) K_nu(z))``.  Unpacks as ``i, k = pair``."""

    i: np.ndarray | float
    k: np.ndarray | float
    scaled: bool

    def __iter__(self):
        yield self.i
        yield self.k


def _check(nu, z):
    z_arr = np.atleast_1d(np.asarray(z, dtype=float))
    if not 0.0 < nu <= 3.0:
        raise ValueError(f"order must lie in (0, 3], got {nu}")
    if np.any(~(z_arr > 0)) or np.any(z_arr >= 1e4):
        raise ValueError("argument must lie in (0, 1e4)")
    return z_arr


def _finish(z, z_arr, i_s, k_s, scaled):
    if scaled is None:
        scaled = bool(np.any(z_arr > OVERFLOW_THRESHOLD))
    if not scaled:
        i_s = i_s * np.exp(z_arr)
        k_s = k_s * np.exp(-z_arr)
    if np.ndim(z) == 0:
        return float(i_s[0]), float(k_s[0]), scaled
    return i_s, k_s, scaled


def bessel_iv_kv(nu: float, z, *, scaled: bool | None = None) -> BesselPair:
    """Evaluate ``I_nu(z)`` and ``K_nu(z)``.

    Parameters
    ----------
    nu : float
        Order in ``(0, 3]``.
    z : float or array
        Arguments in ``(0, 1e4)``.
    scaled : bool, optional
        Force scaled (``True``) or plain (``False``) output.  By default the
        output is scaled exactly when some argument exceeds 700, where plain
        values would overflow.
    """
    nu = float(nu)
    z_arr = _check(nu, z)
    i_s, k_s = _scaled_pair(nu, z_arr)
    i_out, k_out, sc = _finish(z, z_arr, i_s, k_s, scaled)
    return BesselPair(i_out, k_out, sc)


def bessel_iv_kv_derivatives(nu: float, z, *, scaled: bool | None = None):
    """Return ``(pair, dI, dK)`` using
    ``I' = I_{nu+1} + (nu/z) I`` and ``K' = -K_{nu+1} + (nu/z) K``.

    Derivatives carry the same scaling as ``pair``.
    """
    nu = float(nu)
    if not 0.0 < nu <= 2.0:
        raise ValueError(f"order must lie in (0, 2] for derivatives, got {nu}")
    z_arr = _check(nu, z)
    i_s, k_s = _scaled_pair(nu, z_arr)
    i1, k1 = _scaled_pair(nu + 1.0, z_arr)
    di = i1 + (nu / z_arr) * i_s
    dk = -k1 + (nu / z_arr) * k_s
    i_out, k_out, sc = _finish(z, z_arr, i_s, k_s, scaled)
    di_out, dk_out, _ = _finish(z, z_arr, di, dk, sc)
    return BesselPair(i_out, k_out, sc), di_out, dk_out
