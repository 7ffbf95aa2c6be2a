"""Comparison ODEs: closed forms for ``psi'' = kappa^2 (r-s)^(-alpha) psi``,
Sturm ordering, and the ODE-level chain behind the off-pole volume bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .bessel import bessel_iv_kv_derivatives
from .geometry import solve_warping, volume_ball, sphere_area, Warping
from .profiles import CurvatureProfile, RadialGrid

__all__ = [
    "ClosedFormPsi",
    "closed_form_psi",
    "numeric_psi",
    "indicial_exponents",
    "SturmPair",
    "SturmReport",
    "sturm_pair",
    "sturm_compare",
    "ChainRecord",
    "ChainReport",
    "volume_lowerbound_chain",
    "chain_sweep",
]


def indicial_exponents(kappa: float) -> tuple[float, float]:
    """Roots ``(1 +- sqrt(1 + 4 kappa^2)) / 2`` of ``p (p - 1) = kappa^2``."""
    root = math.sqrt(1.0 + 4.0 * kappa * kappa)
    return (1.0 + root) / 2.0, (1.0 - root) / 2.0


@dataclass(frozen=True)
class ClosedFormPsi:
    """Closed-form solution (or barrier) of the comparison problem on ``[0, r)``.

    ``case`` is ``power`` (alpha = 2), ``bessel`` (0 <= alpha < 2), or
    ``hyperbolic`` (alpha < 0).  The hyperbolic expression is a barrier, not
    an exact solution; :attr:`exact` says which.
    """

    case: str
    kappa: float
    alpha: float
    r: float
    c1: float
    c2: float
    exact: bool = True
    _meta: dict = field(default_factory=dict, repr=False, compare=False)

    def coefficient(self, s):
        s = np.asarray(s, dtype=float)
        if self.alpha == 0:
            return np.full_like(s, self.kappa**2)
        return self.kappa**2 * (self.r - s) ** (-self.alpha)

    def __call__(self, s):
        return self.evaluate(s)[0]

    def derivative(self, s):
        return self.evaluate(s)[1]

    def evaluate(self, s):
        """Return ``(psi, psi', psi'')`` at ``s`` in ``[0, r)``."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s_arr < 0) or np.any(s_arr > self.r):
            raise ValueError("s outside [0, r]")
        if self.kappa == 0:
            out = (s_arr.copy(), np.ones_like(s_arr), np.zeros_like(s_arr))
        elif self.case == "power":
            out = self._power(s_arr)
        elif self.case == "bessel":
            out = self._bessel(s_arr)
        else:
            out = self._hyperbolic(s_arr)
        if np.ndim(s) == 0:
            return tuple(float(v[0]) for v in out)
        return out

    # -- cases ------------------------------------------------------------
    def _power(self, s):
        if np.any(s >= self.r):
            raise ValueError("the power solution is singular at s = r")
        pp, pm = indicial_exponents(self.kappa)
        root = pp - pm
        x = self.r - s
        lr = math.log(self.r)
        lx = np.log(x)
        # psi = r^p+ x^p- (1 - (x/r)^root) / root, written to avoid cancellation
        base = np.exp(pp * lr + pm * lx)
        diff = -np.expm1(root * (lx - lr))
        psi = base * diff / root
        # d/dx of C1 x^p+ + C2 x^p- with psi' = -d/dx
        t_plus = np.exp(pm * lr + (pp - 1) * lx)  # r^p- x^(p+ - 1)
        t_minus = np.exp(pp * lr + (pm - 1) * lx)  # r^p+ x^(p- - 1)
        dpsi = (pp * t_plus - pm * t_minus) / root
        ddpsi = self.kappa**2 * psi / x**2
        return psi, dpsi, ddpsi

    def _bessel(self, s):
        a = self.alpha
        nu = self._meta["nu"]
        beta = self._meta["beta"]
        kap = self.kappa
        zr = self._meta["z_r"]
        amp = self._meta["amp"]  # z_r / (kappa r^((1-a)/2))
        x = self.r - s
        at_end = x <= 0
        xs = np.where(at_end, 1.0, x)
        z = kap * xs**beta / beta
        pair, di, dk = bessel_iv_kv_derivatives(nu, z, scaled=True)
        ir, kr = self._meta["ir_scaled"], self._meta["kr_scaled"]
        # F(z) = I(z_r) K(z) - K(z_r) I(z) in scaled pieces
        e_minus = np.exp(zr - z)
        e_plus = np.exp(z - zr)
        F = ir * pair.k * e_minus - kr * pair.i * e_plus
        dF = ir * dk * e_minus - kr * di * e_plus
        ddF = F * (1.0 + nu * nu / z**2) - dF / z
        zp = kap * xs ** (beta - 1.0)
        zpp = kap * (beta - 1.0) * xs ** (beta - 2.0)
        sq = np.sqrt(xs)
        P = sq * F
        dP = F / (2 * sq) + sq * dF * zp
        ddP = -F / (4 * xs * sq) + dF * zp / sq + sq * (ddF * zp * zp + dF * zpp)
        psi = amp * P
        dpsi = -amp * dP
        ddpsi = amp * ddP
        if np.any(at_end):
            # sqrt(x) K_nu(z) -> Gamma(nu) 2^(nu-1) (beta/kappa)^nu as x -> 0
            limit = math.gamma(nu) * 2 ** (nu - 1) * (beta / kap) ** nu
            psi = np.where(at_end, amp * ir * math.exp(zr) * limit, psi)
            dpsi = np.where(at_end, np.nan, dpsi)
            ddpsi = np.where(at_end, np.nan, ddpsi)
        return psi, dpsi, ddpsi

    def _hyperbolic(self, s):
        # C1 sinh(w) + C2 cosh(w) collapses to a multiple of sinh(w0 - w);
        # evaluating it in that form avoids cosh^2 - sinh^2 cancellation
        a = self.alpha
        kap = self.kappa
        beta = 1.0 - a / 2.0
        lead = (1.0 + self.r) ** (a / 2.0) / kap
        gap = 1.0 + self.r - s
        w0 = (2.0 * kap / (2.0 - a)) * ((1.0 + self.r) ** beta - 1.0)
        w = (2.0 * kap / (2.0 - a)) * (gap**beta - 1.0)
        wp = -kap * gap ** (-a / 2.0)
        wpp = -kap * (a / 2.0) * gap ** (-a / 2.0 - 1.0)
        sh, ch = np.sinh(w0 - w), np.cosh(w0 - w)
        psi = lead * sh
        dpsi = -lead * ch * wp
        ddpsi = lead * (sh * wp * wp - ch * wpp)
        return psi, dpsi, ddpsi

    def ode_residual(self, s):
        """``|psi'' - G psi|`` at ``s`` (zero up to rounding for exact cases)."""
        psi, _, ddpsi = self.evaluate(s)
        return np.abs(ddpsi - self.coefficient(s) * psi)

    def endpoint_bound(self) -> float:
        """``r^(1 + sqrt(1+4 kappa^2)) / sqrt(1+4 kappa^2)``: the alpha = 2
        bound on ``psi(r - 1)``."""
        root = math.sqrt(1.0 + 4.0 * self.kappa**2)
        return self.r ** (1.0 + root) / root


def closed_form_psi(kappa: float, alpha: float, r: float) -> ClosedFormPsi:
    """Closed form of ``psi'' = kappa^2 (r-s)^(-alpha) psi``, ``psi(0)=0``,
    ``psi'(0)=1`` on ``[0, r)``.

    * ``alpha = 2``: ``psi = C1 (r-s)^p+ + C2 (r-s)^p-`` with
      ``C1 = -r^p- / sqrt(1+4k^2)``, ``C2 = r^p+ / sqrt(1+4k^2)``.
    * ``0 <= alpha < 2``: ``psi = sqrt(r-s) [C1 I_nu(z) + C2 K_nu(z)]`` with
      ``nu = 1/(2-alpha)``, ``z = kappa (r-s)^beta / beta``, ``beta = 1-alpha/2``,
      ``C2 = z_r I_nu(z_r) / (kappa r^((1-alpha)/2))``, ``C1 = -C2 K/I (z_r)``.
    * ``alpha < 0``: the cosh/sinh barrier with the stated ``C1, C2``.
    """
    kappa = float(kappa)
    alpha = float(alpha)
    r = float(r)
    if not -2.0 <= alpha <= 2.0:
        raise ValueError(f"alpha must lie in [-2, 2], got {alpha}")
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    if r <= 0:
        raise ValueError(f"r must be positive, got {r}")
    if alpha == 2.0:
        pp, pm = indicial_exponents(kappa)
        root = pp - pm
        return ClosedFormPsi("power", kappa, alpha, r, -(r**pm) / root, r**pp / root)
    if alpha >= 0.0:
        if kappa == 0:
            return ClosedFormPsi("bessel", kappa, alpha, r, 0.0, 0.0)
        beta = 1.0 - alpha / 2.0
        nu = 1.0 / (2.0 - alpha)
        zr = kappa * r**beta / beta
        pair, _, _ = bessel_iv_kv_derivatives(nu, zr, scaled=True)
        amp = zr / (kappa * r ** ((1.0 - alpha) / 2.0))
        with np.errstate(over="ignore"):
            c2 = amp * pair.i * math.exp(min(zr, 700.0)) if zr < 700 else math.inf
            c1 = -amp * pair.k * math.exp(-zr)
        meta = dict(nu=nu, beta=beta, z_r=zr, amp=amp, ir_scaled=pair.i, kr_scaled=pair.k)
        return ClosedFormPsi("bessel", kappa, alpha, r, c1, c2, True, meta)
    if kappa == 0:
        return ClosedFormPsi("hyperbolic", kappa, alpha, r, 0.0, 0.0, True)
    w0 = (2.0 * kappa / (2.0 - alpha)) * ((1.0 + r) ** (1.0 - alpha / 2.0) - 1.0)
    pref = ((1.0 + r) / 2.0) ** (alpha / 2.0)
    return ClosedFormPsi(
        "hyperbolic", kappa, alpha, r, -pref * math.cosh(w0), pref * math.sinh(w0), False
    )


def numeric_psi(kappa: float, alpha: float, r: float, nodes, *, shift: float = 0.0, fixed_step=False) -> Warping:
    """Direct integration of ``psi'' = kappa^2 (shift + r - s)^(-alpha) psi``."""
    prof = CurvatureProfile.power_tail(kappa, alpha, r, shift=shift)
    return solve_warping(prof, RadialGrid(np.asarray(nodes, dtype=float)), fixed_step=fixed_step)


# -- Sturm comparison -------------------------------------------------------
@dataclass(frozen=True, eq=False)
class SturmPair:
    """Two solutions of ``y'' = G y`` on a shared grid, both vanishing at 0."""

    grid: RadialGrid
    phi: np.ndarray
    phi_prime: np.ndarray
    psi: np.ndarray
    psi_prime: np.ndarray
    g_phi: np.ndarray
    g_psi: np.ndarray

    def __post_init__(self):
        if self.phi[0] != 0 or self.psi[0] != 0:
            raise ValueError("both functions must vanish at r = 0")
        if self.phi_prime[0] > self.psi_prime[0]:
            raise ValueError("initial slopes must satisfy phi'(0) <= psi'(0)")


def sturm_pair(profile_phi, profile_psi, grid: RadialGrid, slope_phi=1.0, slope_psi=1.0) -> SturmPair:
    """Solve both problems; a slope ``c`` scales the unit-slope solution by ``c``."""
    wa = solve_warping(profile_phi, grid)
    wb = solve_warping(profile_psi, grid)
    return SturmPair(
        grid,
        slope_phi * wa.h, slope_phi * wa.h_prime,
        slope_psi * wb.h, slope_psi * wb.h_prime,
        profile_phi.evaluate(grid.nodes), profile_psi.evaluate(grid.nodes),
    )


@dataclass(frozen=True)
class SturmReport:
    coefficients_ordered: bool
    values_ordered: bool
    log_derivatives_ordered: bool
    first_violation: float | None
    max_value_excess: float
    max_log_derivative_excess: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.values_ordered and self.log_derivatives_ordered


def sturm_compare(pair: SturmPair, tol: float = 1e-8) -> SturmReport:
    """Check ``phi <= psi`` and ``phi'/phi <= psi'/psi`` at every positive node.

    Excesses are measured relative to ``max(1, |psi|)`` and
    ``max(1, |psi'/psi|)`` so the tolerance means the same on growing
    solutions as near the origin.
    """
    pos = pair.grid.nodes > 0
    r = pair.grid.nodes[pos]
    phi, psi = pair.phi[pos], pair.psi[pos]
    lphi = pair.phi_prime[pos] / phi
    lpsi = pair.psi_prime[pos] / psi
    ex_v = (phi - psi) / np.maximum(1.0, np.abs(psi))
    ex_l = (lphi - lpsi) / np.maximum(1.0, np.abs(lpsi))
    bad = np.nonzero((ex_v > tol) | (ex_l > tol))[0]
    return SturmReport(
        coefficients_ordered=bool(np.all(pair.g_phi <= pair.g_psi + 1e-15 * np.maximum(1, pair.g_psi))),
        values_ordered=bool(np.all(ex_v <= tol)),
        log_derivatives_ordered=bool(np.all(ex_l <= tol)),
        first_violation=float(r[bad[0]]) if bad.size else None,
        max_value_excess=float(ex_v.max()),
        max_log_derivative_excess=float(ex_l.max()),
        tolerance=tol,
    )


# -- volume chain ------------------------------------------------------------
@dataclass(frozen=True)
class ChainRecord:
    r_x: float
    integral: float
    integral_h: float
    h_below_psi: bool
    endpoint_value: float | None
    endpoint_bound: float | None
    bound_ok: bool

    def to_json(self, fitted_exponent: float | None) -> dict:
        return {
            "r_x": self.r_x,
            "integral": self.integral,
            "fitted_exponent": fitted_exponent,
            "bound_ok": self.bound_ok,
        }


@dataclass(frozen=True)
class ChainReport:
    kappa: float
    alpha: float
    d: int
    records: tuple
    fitted_exponent: float | None
    expected_exponent: float | None
    fit_kind: str
    c3_fit: float | None
    c4_fit: float | None

    @property
    def all_bounds_ok(self) -> bool:
        return all(rec.bound_ok for rec in self.records)

    def to_json(self) -> list:
        return [rec.to_json(self.fitted_exponent) for rec in self.records]


def _chain_upper(alpha: float, r_x: float) -> float:
    """Right end of the comparison interval: ``r_x - 1`` for alpha = 2."""
    return r_x - 1.0 if alpha == 2.0 else r_x


def volume_lowerbound_chain(kappa: float, alpha: float, d: int, r_x: float, *, n: int = 2000) -> ChainRecord:
    """ODE-level chain for one centre distance ``r_x``.

    ``h`` solves ``h'' = kappa^2 (1 + |r_x - s|^2)^(-alpha/2) h`` and ``psi``
    solves the majorant problem: coefficient ``kappa^2 (r_x - s)^(-alpha)``
    for ``alpha >= 0`` (closed form) and ``kappa^2 (1 + r_x - s)^(-alpha)``
    for ``alpha < 0`` (numerical), which dominates the true coefficient.
    Checks ``h <= psi`` on the interval and integrates ``psi^(d-1)``.
    """
    if r_x < 1:
        raise ValueError("r_x must be >= 1")
    if not -2.0 <= alpha <= 2.0:
        raise ValueError("alpha must lie in [-2, 2]")
    top = _chain_upper(alpha, r_x)
    grid = RadialGrid.uniform(top, n)
    h_prof = CurvatureProfile.standard(kappa, alpha, center=r_x)
    w_h = solve_warping(h_prof, grid)
    integral_h = volume_ball(w_h, d, top) / sphere_area(d)
    endpoint_value = endpoint_bound = None
    if alpha < 0 and kappa > 0:
        w_psi = numeric_psi(kappa, alpha, r_x, grid.nodes, shift=1.0)
        psi_nodes = w_psi.h
        integral = volume_ball(w_psi, d, top) / sphere_area(d)
    else:
        cf = closed_form_psi(kappa, alpha, r_x)
        psi_nodes = np.asarray(cf(grid.nodes), dtype=float)
        k = d - 1
        integral, _ = integrate.quad(
            lambda s: float(cf(s)) ** k, 0.0, top, epsabs=0.0, epsrel=1e-12, limit=200
        )
        if alpha == 2.0:
            endpoint_value = float(cf(top))
            endpoint_bound = cf.endpoint_bound()
    scale = np.maximum(1.0, np.abs(psi_nodes))
    h_below = bool(np.all((w_h.h - psi_nodes) / scale <= 1e-9))
    ok = h_below and integral_h <= integral * (1 + 1e-9)
    if endpoint_bound is not None:
        ok = ok and endpoint_value <= endpoint_bound
    return ChainRecord(float(r_x), float(integral), float(integral_h), h_below, endpoint_value, endpoint_bound, ok)


def _fit_exponential_rate(r, log_i, log_power):
    """Fit ``log_i - log_power * log r = a + b r^p`` over a grid of ``p``."""
    y = log_i - log_power * np.log(r)
    best = None
    for p in np.linspace(0.05, 2.5, 2451):
        X = np.column_stack([np.ones_like(r), r**p])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        res = float(np.sum((X @ coef - y) ** 2))
        if best is None or res < best[0]:
            best = (res, p, coef)
    return best[1], best[2]


def chain_sweep(kappa: float, alpha: float, d: int, radii=(2.0, 4.0, 8.0, 16.0), *, n: int = 2000) -> ChainReport:
    """Run the chain for several ``r_x`` and fit the growth of the integral.

    * ``alpha = 2``: log-log slope of the integral (polynomial growth); the
      expected ceiling is ``1 + (d-1)(1 + sqrt(1+4 kappa^2))/2``.
    * ``alpha < 2``: exponent ``p`` in ``log I - (1 + (d-1)alpha/4) log r
      = log C3 + C4 r^p``; the expected value is ``1 - alpha/2``.
    * ``kappa = 0``: the integral is ``r^d / d`` and the slope is ``d``.

    ``c3_fit`` and ``c4_fit`` are envelope constants at the theoretical rate
    ``1 - alpha/2``: ``I <= c3 r^(1+(d-1)alpha/4) exp(c4 r^(1-alpha/2))`` holds
    at every swept ``r_x``.
    """
    records = tuple(volume_lowerbound_chain(kappa, alpha, d, R, n=n) for R in radii)
    r = np.array([rec.r_x for rec in records])
    log_i = np.log([rec.integral for rec in records])
    c3 = c4 = None
    if kappa == 0 or alpha == 2.0:
        slope, _ = np.polyfit(np.log(r), log_i, 1)
        fitted = float(slope)
        if kappa == 0:
            expected, kind = float(d), "power"
        else:
            expected = 1.0 + (d - 1) * indicial_exponents(kappa)[0]
            kind = "power"
    else:
        log_power = 1.0 + (d - 1) * alpha / 4.0
        p, _ = _fit_exponential_rate(r, log_i, log_power)
        fitted = float(p)
        expected = 1.0 - alpha / 2.0
        kind = "stretched-exponential"
    if alpha < 2.0:
        # envelope constants at the theoretical rate: C4 by least squares,
        # C3 the smallest prefactor making the envelope hold at every r_x
        rate = 1.0 - alpha / 2.0
        y = log_i - (1.0 + (d - 1) * alpha / 4.0) * np.log(r)
        X = np.column_stack([np.ones_like(r), r**rate])
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        c4 = float(coef[1])
        c3 = float(math.exp(np.max(y - c4 * r**rate)))
    return ChainReport(kappa, alpha, d, records, fitted, expected, kind, c3, c4)
