"""Exhaustion functions and Laplacian cut-offs on model manifolds.

The exhaustion is ``-log(omega)`` for the decaying solution of
``omega'' + H omega' = f omega`` on ``[1/2, inf)`` with ``omega(1/2) = 1``,
where ``H = (d-1) h'/h`` and ``f = A1^2 C^2 / r^alpha``.  The infinite domain
is reached by Dirichlet solves on ``[1/2, R_n]`` with ``R_n`` doubled until
the solution stops moving.  Cut-offs compose a smooth step with either the
exhaustion (``alpha < 2``) or an annulus Poisson solution (``alpha = 2``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .comparison import chain_sweep, indicial_exponents
from .dirichlet import solve_dirichlet, uniform_first_derivative as _d1, uniform_second_derivative as _d2
from .geometry import LogDerivative, solve_warping
from .profiles import CurvatureProfile, RadialGrid
from .smoothstep import SmoothStep

__all__ = [
    "ExhaustionError",
    "CutoffError",
    "ExhaustionProfile",
    "CutoffProfile",
    "AnnulusSolution",
    "CutoffSequence",
    "solve_exhaustion",
    "build_cutoff_general",
    "build_cutoff_alpha2",
    "build_sequence",
    "alpha2_theta_function",
    "sweep_summary",
]

INNER = 0.5
_PAD = 8
GLUE_END = 1.0


class ExhaustionError(RuntimeError):
    """Non-stabilization or a non-positive discrete solution."""


class CutoffError(ValueError):
    """Construction preconditions that cannot be met."""


RICCATI_REFERENCE_SPACING = 1.0 / 64.0
RK4_STIFFNESS_CAP = 2.5


def _cumulative_integral(fx, dfx, dx):
    """Trapezoid with endpoint-derivative correction (fourth order)."""
    pieces = dx * (fx[:-1] + fx[1:]) / 2.0 + dx * dx * (dfx[:-1] - dfx[1:]) / 12.0
    return np.concatenate(([0.0], np.cumsum(pieces)))


# -- exhaustion ---------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ExhaustionProfile:
    """Radial exhaustion function sampled on a uniform grid from 0.

    ``value`` is ``(eta - 1) log(omega) + eta + offset`` with ``eta`` a C^2
    step from 1 on ``[0, 1/2]`` to 0 beyond 1.  The additive ``offset`` does
    not change any derivative; it is chosen to make ``D2/D1`` small.
    """

    alpha: float
    kappa: float
    d: int
    C: float
    r: np.ndarray
    value: np.ndarray
    gradient: np.ndarray
    laplacian: np.ndarray
    log_omega: np.ndarray
    mean_curvature: np.ndarray
    reaction: np.ndarray
    offset: float
    D: tuple
    C4: float
    C5: float
    outer_radius: float
    stabilization: tuple
    ladder: tuple = field(default=())

    @property
    def beta(self) -> float:
        return 1.0 - self.alpha / 2.0

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    @property
    def spacing(self) -> float:
        return float(self.r[1] - self.r[0])

    @property
    def omega(self) -> np.ndarray:
        return np.exp(self.log_omega)

    def outside(self, radius: float = GLUE_END) -> np.ndarray:
        return self.r >= radius - 1e-12

    def identity_residual(self) -> np.ndarray:
        """``Lap(r_ex) - (|grad r_ex|^2 - f)`` outside the unit ball."""
        m = self.outside()
        return self.laplacian[m] - (self.gradient[m] ** 2 - self.reaction[m])

    def growth_exponent(self, r_lo: float = 2.0, r_hi: float | None = None) -> float:
        """Exponent ``p`` of the least-squares fit ``c0 + c1 r^p + c2 log r`` on ``[r_lo, r_hi]``.

        The constant absorbs the glue and offset; the logarithm absorbs the
        ``h^((d-1)/2) f^(-1/4)`` prefactor of ``omega``.  ``r_hi`` defaults to
        ``r_max / 4``.
        """
        r_hi = self.r_max / 4.0 if r_hi is None else r_hi
        m = (self.r >= r_lo) & (self.r <= r_hi)
        r, y = self.r[m], self.value[m]

        def misfit(p):
            X = np.column_stack([np.ones_like(r), r**p, np.log(r)])
            coef, *_ = np.linalg.lstsq(X, y, rcond=None)
            return float(np.sum((X @ coef - y) ** 2))

        grid = np.linspace(0.05, 2.5, 246)
        k = int(np.argmin([misfit(p) for p in grid]))
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        return float(minimize_scalar(misfit, bounds=(lo, hi), method="bounded", options={"xatol": 1e-6}).x)

    def sandwich_ok(self) -> bool:
        lo, hi = _sandwich_bounds(self.alpha, self.r, self.D[0], self.D[1])
        v = self.value
        return bool(np.all(v >= lo - 1e-12 * np.abs(v)) and np.all(v <= hi + 1e-12 * np.abs(v)))

    def level_radius(self, level: float) -> float:
        """Smallest sampled-interpolated radius beyond 1 where the value reaches ``level``."""
        m = self.outside()
        r, v = self.r[m], self.value[m]
        if level > v[-1]:
            raise CutoffError(f"level {level:.6g} beyond the exhaustion domain (max {v[-1]:.6g})")
        if level <= v[0]:
            return float(r[0])
        return float(np.interp(level, v, r))


def _sandwich_bounds(alpha, r, D1, D2):
    beta = 1.0 - alpha / 2.0
    if alpha == 2.0:
        with np.errstate(divide="ignore"):
            lg = 1.0 + np.log(np.where(r > 0, r, 1e-300))
        return D1 * np.maximum(lg, 0.0), D2 * np.maximum(lg, 1.0)
    return D1 * r**beta, D2 * np.maximum(1.0, r**beta)


def _fit_D(alpha, r, value, gradient, laplacian):
    """Tightest sandwich and rate constants on the samples."""
    beta = 1.0 - alpha / 2.0
    pos = r > 0
    out = r > GLUE_END
    if alpha == 2.0:
        lg = 1.0 + np.log(r[pos])
        sel = lg > 0
        D1 = float(np.min(value[pos][sel] / lg[sel]))
        D2 = float(np.max(value[pos] / np.maximum(lg, 1.0)))
        D3 = float(np.max(np.abs(gradient[out]) * r[out]))
        D4 = float(np.max(np.abs(laplacian[out]) * r[out] ** 2))
    else:
        D1 = float(np.min(value[pos] / r[pos] ** beta))
        D2 = float(np.max(value / np.maximum(1.0, r**beta)))
        D3 = float(np.max(np.abs(gradient[out]) * r[out] ** (alpha / 2.0)))
        D4 = float(np.max(np.abs(laplacian[out]) * r[out] ** alpha))
    return D1, D2, D3, D4


def _best_offset(alpha, r, base):
    """Additive constant minimizing ``D2/D1``; keeps the values positive."""
    lo = -float(np.min(base)) + 1e-6

    def ratio(k):
        D1, D2 = _ratio_parts(alpha, r, base + k)
        return D2 / D1 if D1 > 0 else np.inf

    hi = float(np.max(base))
    res = minimize_scalar(ratio, bounds=(lo, hi), method="bounded", options={"xatol": 1e-9})
    best = float(res.x)
    return best if ratio(best) <= ratio(0.0) else 0.0


def _ratio_parts(alpha, r, value):
    beta = 1.0 - alpha / 2.0
    pos = r > 0
    if alpha == 2.0:
        lg = 1.0 + np.log(r[pos])
        sel = lg > 0
        D1 = np.min(value[pos][sel] / lg[sel])
        D2 = np.max(value[pos] / np.maximum(lg, 1.0))
    else:
        D1 = np.min(value[pos] / r[pos] ** beta)
        D2 = np.max(value / np.maximum(1.0, r**beta))
    return D1, D2


def _a1(alpha):
    """``(1 - alpha/2)/sqrt(2)``; the alpha = 2 value (zero) is replaced by
    the alpha = 0 one so that the reaction term stays active."""
    return (1.0 - alpha / 2.0) / math.sqrt(2.0) if alpha < 2.0 else 1.0 / math.sqrt(2.0)


def _min_a3(alpha, r_hi):
    """Smallest ``A`` with ``r^(alpha/2) <= A exp(A r^(1-alpha/2))`` on ``[1, r_hi]``."""
    beta = 1.0 - alpha / 2.0
    rr = np.geomspace(1.0, max(r_hi, 2.0), 4000)

    def gap(A):
        return float(np.max(rr ** (alpha / 2.0) * np.exp(-A * rr**beta)) - A)

    return float(brentq(gap, 1e-6, 50.0, xtol=1e-12))


def _volume_penalty(kappa, alpha, d):
    """Rate ``c4`` of the envelope ``exp(c4 r^(1-alpha/2))`` for the volume chain."""
    if alpha >= 2.0:
        return 0.0
    return max(0.0, float(chain_sweep(kappa, alpha, d, n=800).c4_fit))


def _decay_rate(r, H, f, alpha):
    """Log-derivative of the decaying solution at large ``r`` (WKB / Euler)."""
    if alpha == 2.0:
        a_eff = r * H
        c = f * r * r
        return ((1.0 - a_eff) - math.sqrt((1.0 - a_eff) ** 2 + 4.0 * c)) / (2.0 * r)
    return -(H + math.sqrt(H * H + 4.0 * f)) / 2.0


class _Solver:
    """Dirichlet solves of the gauged exhaustion problem for one ``C``."""

    def __init__(self, alpha, kappa, d, spacing, theta, method="fd"):
        self.method = method
        self.alpha = alpha
        self.kappa = kappa
        self.d = d
        self.spacing = spacing
        self.theta = theta
        self.profile = CurvatureProfile.standard(kappa, alpha)
        self._warp: dict = {}

    def log_derivative(self, R: float) -> "LogDerivative":
        if R not in self._warp:
            self._warp[R] = LogDerivative(self.profile, R)
        return self._warp[R]

    def coefficients(self, r, C, q_of_r):
        d, a = self.d, self.alpha
        q = q_of_r(r)
        H = (d - 1) * q
        dH = (d - 1) * (self.profile.evaluate(r) - q * q)
        f = (_a1(a) * C) ** 2 / r**a
        df = -a * f / r
        disc = np.sqrt(H * H + 4.0 * f)
        mu = 0.5 * (H + disc)
        dmu = 0.5 * (dH + (H * dH + 2.0 * df) / disc)
        return H, f, self.theta * mu, self.theta * dmu

    def solve(self, C, R_n, r_check):
        if self.method == "riccati":
            return self.solve_riccati(C, R_n)
        return self.solve_fd(C, R_n, r_check)

    def solve_riccati(self, C, R_n):
        """Integrate ``l = omega'/omega`` backwards from ``R_n``.

        ``l' = f - l^2 - H l`` contracts onto the decaying branch when run
        towards the pole, so no underflow or sign problems arise.
        """
        q = self.log_derivative(R_n)
        d, a = self.d, self.alpha
        coef = (_a1(a) * C) ** 2
        n = int(round((R_n - INNER) / self.spacing))
        r = INNER + self.spacing * np.arange(n + 1)
        # classical RK4 with per-cell substeps, decided locally so that the
        # discretization of a cell does not depend on R_n.  The stiffness
        # budget h * sqrt(H^2 + 4f) scales with the spacing (so halving the
        # spacing halves every substep) and is capped for RK4 stability.
        Hr = (d - 1) * q(r)
        fr = coef / r**a
        stiff = np.maximum(np.sqrt(Hr * Hr + 4.0 * fr)[:-1], np.sqrt(Hr * Hr + 4.0 * fr)[1:])
        subs = np.maximum.reduce([
            np.full(n, 2.0),
            np.ceil(RICCATI_REFERENCE_SPACING * stiff),
            np.ceil(self.spacing * stiff / RK4_STIFFNESS_CAP),
        ]).astype(int)
        pieces = [r[i] + (self.spacing / subs[i]) * 0.5 * np.arange(2 * subs[i]) for i in range(n)]
        x = np.concatenate(pieces + [r[-1:]])
        start = np.concatenate(([0], np.cumsum(2 * subs)))
        Hx = (d - 1) * q(x)
        fx = coef / x**a
        ell = np.empty(n + 1)
        y = _decay_rate(R_n, Hr[-1], fr[-1], a)
        ell[n] = y
        for i in range(n - 1, -1, -1):
            h = self.spacing / subs[i]
            k = start[i + 1]
            for _ in range(subs[i]):
                k1 = fx[k] - y * y - Hx[k] * y
                ym = y - 0.5 * h * k1
                k2 = fx[k - 1] - ym * ym - Hx[k - 1] * ym
                ym = y - 0.5 * h * k2
                k3 = fx[k - 1] - ym * ym - Hx[k - 1] * ym
                ye = y - h * k3
                k4 = fx[k - 2] - ye * ye - Hx[k - 2] * ye
                y = y - h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
                k -= 2
            ell[i] = y
        if not np.all(np.isfinite(ell)):
            raise ExhaustionError("Riccati integration diverged")
        dell = fr - ell * ell - Hr * ell
        log_omega = _cumulative_integral(ell, dell, self.spacing)
        return r, log_omega, fr, Hr

    def solve_fd(self, C, R_n, r_check):
        """Return ``(r, log_omega, f, H)`` on the coarse nodes of ``[1/2, R_n]``."""
        w = self.log_derivative(R_n)
        dx_f = self.spacing / 2.0
        n_f = int(round((R_n - INNER) / dx_f))
        r_f = INNER + dx_f * np.arange(n_f + 1)
        H, f, gp, gpp = self.coefficients(r_f, C, w)
        g = _cumulative_integral(gp, gpp, dx_f)
        drift = H - 2.0 * gp
        react = -(gp * gp - gpp - H * gp - f)
        robin = _decay_rate(r_f[-1], H[-1], f[-1], self.alpha) + gp[-1]
        fine = solve_dirichlet(r_f, drift, react, 0.0, 1.0, robin=robin).values
        coarse = solve_dirichlet(r_f[::2], drift[::2], react[::2], 0.0, 1.0, robin=robin).values
        v = (4.0 * fine[::2] - coarse) / 3.0
        # far-field underflow to zero is harmless; sign changes are not
        r = r_f[::2]
        near = r <= r_check
        if np.any(v[near] <= 0) or np.any(fine[::2][near] <= 0) or np.any(v < -1e-250):
            raise ExhaustionError("non-positive discrete solution (scheme failure)")
        with np.errstate(divide="ignore", invalid="ignore"):
            log_omega = -g[::2] + np.log(np.where(v > 0, v, np.nan))
        return r, log_omega, f[::2], H[::2]


def solve_exhaustion(
    alpha: float,
    kappa: float,
    d: int,
    r_valid: float = 64.0,
    *,
    C: float | None = None,
    ladder=(1, 2, 4, 8, 16, 32, 64, 128, 256),
    spacing: float = 1.0 / 64.0,
    theta: float = 0.9,
    method: str | None = None,
    tol: float = 1e-8,
    max_doublings: int = 4,
    outer_factor: float | None = None,
    optimize_offset: bool = True,
) -> ExhaustionProfile:
    """Exhaustion function on ``[0, r_valid]`` for the standard profile.

    ``R_n`` starts at ``outer_factor * r_valid`` and doubles until ``log(omega)`` moves by
    less than ``tol`` on ``[1/2, r_valid]``.  Without an explicit ``C`` the
    smallest ladder value with positive decay proxies is used: the rate
    ``C5 = (2^-beta C - c_vol)/2 - A3`` (``c_vol`` from the volume chain,
    ``A3`` from ``r^(alpha/2) <= A3 exp(A3 r^beta)``) and
    ``C5 - log C4`` with ``C4 = max omega exp(C5 r^beta)`` on ``r >= 1``.
    """
    if not -2.0 <= alpha <= 2.0:
        raise ValueError(f"alpha must lie in [-2, 2], got {alpha}")
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    if int(d) != d or d < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {d}")
    if r_valid < 2:
        raise ValueError("r_valid must be at least 2")
    n_valid = int(round(r_valid / spacing))
    r_valid = n_valid * spacing
    # alpha < 0: omega decays like exp(-c r^(1+|alpha|/2)), too fast for the
    # difference scheme to resolve; the Riccati route handles it
    if method is None:
        method = "fd" if alpha >= 0 else "riccati"
    if method not in ("fd", "riccati"):
        raise ValueError(f"method must be 'fd' or 'riccati', got {method!r}")
    if outer_factor is None:
        outer_factor = 4.0 if alpha >= 0 else 2.0
    solver = _Solver(float(alpha), float(kappa), int(d), spacing, theta, method)
    beta = 1.0 - alpha / 2.0

    penalty = _volume_penalty(kappa, alpha, d) if C is None and alpha < 2 else 0.0
    a3 = _min_a3(alpha, r_valid) if alpha < 2 else 0.0
    candidates = [float(C)] if C is not None else [float(c) for c in ladder]
    records = []
    chosen = None
    for c in candidates:
        if alpha < 2:
            c5 = (2.0 ** (-beta) * c - penalty) / 2.0 - a3
            if alpha < 0:
                c5 -= 1.0
        else:
            c5 = None
        if C is None and c5 is not None and c5 <= 0:
            records.append({"C": c, "C5": c5, "C5_minus_logC4": None, "accepted": False})
            continue
        r_out, log_om, f_out, H_out, hist, R_n = _stabilize(solver, c, r_valid, tol, max_doublings, outer_factor)
        m = r_out >= GLUE_END
        if alpha < 2:
            c4 = float(np.max(log_om[m] + c5 * r_out[m] ** beta))
        else:
            X = np.column_stack([np.ones(m.sum()), np.log(r_out[m])])
            coef, *_ = np.linalg.lstsq(X, -log_om[m], rcond=None)
            c5 = float(coef[1])
            c4 = float(np.max(log_om[m] + c5 * np.log(r_out[m])))
        ok = c5 > 0 and c5 - c4 > 0
        records.append({"C": c, "C5": c5, "C5_minus_logC4": c5 - c4, "accepted": bool(ok or C is not None)})
        if ok or C is not None:
            chosen = (c, c5, math.exp(c4), r_out, log_om, f_out, H_out, hist, R_n)
            break
    if chosen is None:
        raise ExhaustionError(f"no ladder constant gave positive decay proxies: {records}")
    c, c5, c4, r_out, log_om, f_out, H_out, hist, R_n = chosen

    # glue: r_ex = (eta - 1) L + eta, derivatives by the product rule with
    # L', L'' from fourth-order stencils on the smooth part [1/2, inf)
    dL = _d1(log_om, spacing)
    d2L = _d2(log_om, spacing)
    step = SmoothStep(INNER, GLUE_END)
    eta = step(r_out)
    e1 = step.derivative(r_out, 1)
    e2 = step.derivative(r_out, 2)
    base_out = (eta - 1.0) * log_om + eta
    grad_out = e1 * log_om + (eta - 1.0) * dL + e1
    second_out = e2 * log_om + 2.0 * e1 * dL + (eta - 1.0) * d2L + e2
    lap_out = second_out + H_out * grad_out
    n_in = int(round(INNER / spacing))
    n_keep = r_out.size - _PAD
    r_full = np.concatenate((spacing * np.arange(n_in), r_out[:n_keep]))
    pre = np.zeros(n_in)
    base = np.concatenate((pre + 1.0, base_out[:n_keep]))
    grad = np.concatenate((pre, grad_out[:n_keep]))
    lap = np.concatenate((pre, lap_out[:n_keep]))
    L = np.concatenate((pre, log_om[:n_keep]))
    H_full = np.concatenate((pre, H_out[:n_keep]))
    f_full = np.concatenate((pre, f_out[:n_keep]))
    offset = _best_offset(alpha, r_full, base) if optimize_offset else 0.0
    value = base + offset
    D = _fit_D(alpha, r_full, value, grad, lap)
    for arr in (r_full, value, grad, lap, L, H_full, f_full):
        arr.setflags(write=False)
    return ExhaustionProfile(
        float(alpha), float(kappa), int(d), c, r_full, value, grad, lap, L, H_full, f_full,
        offset, D, c4, c5, R_n, tuple(hist), tuple(records),
    )


def _stabilize(solver, C, r_valid, tol, max_doublings, outer_factor):
    R_n = outer_factor * r_valid
    prev = None
    hist = []
    r_check = r_valid + (_PAD + 1) * solver.spacing
    for _ in range(max_doublings + 1):
        r, L, f, H = solver.solve(C, R_n, r_check)
        m = r <= r_valid + 1e-12
        if prev is not None:
            change = float(np.max(np.abs(L[m] - prev)))
            hist.append((R_n, change))
            if change < tol:
                keep = r <= r_valid + _PAD * (r[1] - r[0]) + 1e-12
                return r[keep], L[keep], f[keep], H[keep], hist, R_n
        prev = L[m]
        R_n *= 2.0
    raise ExhaustionError(
        f"log(omega) did not stabilize on [1/2, {r_valid}] within R_n <= {R_n / 2:g}: {hist}"
    )


# -- cut-off profiles ---------------------------------------------------------
@dataclass(frozen=True, eq=False)
class CutoffProfile:
    """Radial cut-off sampled with its gradient and Laplacian."""

    R: float
    gamma: float
    alpha: float
    r: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    lap_phi: np.ndarray
    plateau_radius: float
    support_radius: float

    @property
    def sup_grad(self) -> float:
        return float(np.max(np.abs(self.dphi)))

    @property
    def sup_lap(self) -> float:
        return float(np.max(np.abs(self.lap_phi)))

    @property
    def C1(self) -> float:
        return self.sup_grad * self.R

    @property
    def C2(self) -> float:
        return self.sup_lap * self.R ** (1.0 + self.alpha / 2.0)

    def in_unit_interval(self) -> bool:
        return bool(np.all(self.phi >= 0.0) and np.all(self.phi <= 1.0))

    def plateau_ok(self, radius: float | None = None) -> bool:
        radius = self.plateau_radius if radius is None else radius
        return bool(np.all(self.phi[self.r <= radius + 1e-12] == 1.0))

    def support_ok(self, radius: float | None = None) -> bool:
        radius = self.support_radius if radius is None else radius
        return bool(np.all(self.phi[self.r >= radius - 1e-12] == 0.0))

    def positive_extent(self) -> float:
        """Largest sampled radius with ``phi > 0``."""
        return float(self.r[np.nonzero(self.phi > 0)[0][-1]])

    def unit_extent(self) -> float:
        """Largest radius ``rho`` with ``phi == 1`` on all samples of ``[0, rho]``."""
        below = np.nonzero(self.phi < 1.0)[0]
        return float(self.r[below[0] - 1]) if below.size else float(self.r[-1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["r", "phi", "dphi", "lap_phi"])
        for row in zip(self.r, self.phi, self.dphi, self.lap_phi):
            wr.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def _compose(step: SmoothStep, arg, darg, lap_arg):
    """Value, gradient and Laplacian of ``step(arg)`` for radial ``arg``."""
    phi = np.asarray(step(arg), dtype=float)
    s1 = step.derivative(arg, 1)
    s2 = step.derivative(arg, 2)
    return phi, s1 * darg, s2 * darg * darg + s1 * lap_arg


def build_cutoff_general(alpha, kappa, d, R, gamma, exh: ExhaustionProfile, *, degree: int = 5) -> CutoffProfile:
    """``phi = psi(r_ex / (D1 R^beta))`` with ``psi = 1`` up to ``D2/D1`` and
    ``0`` from ``gamma^beta`` on, so ``phi = 1`` on ``B_R`` and vanishes off
    ``B_{gamma R}``.  Needs ``gamma^beta > D2/D1``.
    """
    if (alpha, kappa, d) != (exh.alpha, exh.kappa, exh.d):
        raise CutoffError("exhaustion profile built for different (alpha, kappa, d)")
    if alpha >= 2.0:
        raise CutoffError("the general construction needs alpha < 2; use build_cutoff_alpha2")
    if R < 1:
        raise CutoffError(f"R must be >= 1, got {R}")
    beta = 1.0 - alpha / 2.0
    D1, D2 = exh.D[0], exh.D[1]
    threshold = (D2 / D1) ** (1.0 / beta)
    if not gamma > threshold:
        raise CutoffError(
            f"gamma={gamma} is not above the threshold (D2/D1)^(1/beta)={threshold:.6g}"
        )
    if exh.r_max < gamma * R:
        raise CutoffError(f"exhaustion domain {exh.r_max} does not reach gamma*R={gamma * R}")
    step = SmoothStep(D2 / D1, gamma**beta, degree)
    scale = D1 * R**beta
    m = exh.r <= gamma * R + 1e-12
    phi, dphi, lap = _compose(step, exh.value[m] / scale, exh.gradient[m] / scale, exh.laplacian[m] / scale)
    return CutoffProfile(float(R), float(gamma), float(alpha), exh.r[m], phi, dphi, lap, float(R), float(gamma * R))


# -- alpha = 2 ----------------------------------------------------------------
def alpha2_exponent(kappa: float, d: int) -> float:
    """``a = (d-1)(1 + sqrt(1+4 kappa^2))/2``."""
    return (d - 1) * indicial_exponents(kappa)[0]


def alpha2_theta_function(a: float, gamma: float):
    """The R-free function ``h(theta) = u((1+theta)R) - 1 + v((gamma-1-theta)R/(2(gamma-1)))``."""
    g = gamma ** (a + 1.0)
    lead = 1.0 + (gamma**2 - 1.0) / (2.0 * g * (a + 1.0))

    def h(theta):
        t1 = 1.0 + theta
        if abs(a - 1.0) < 1e-14:
            core = -lead * math.log(t1) / math.log(gamma)
        else:
            core = lead * (t1 ** (1.0 - a) - 1.0) / (1.0 - gamma ** (1.0 - a))
        return core + (t1**2 - 1.0) / (2.0 * g * (a + 1.0)) + (gamma - 1.0 - theta) ** 2 / (
            8.0 * g * (gamma - 1.0) ** 2 * (a + 1.0)
        )

    return h


@dataclass(frozen=True, eq=False)
class AnnulusSolution:
    R: float
    gamma: float
    a: float
    C2: float
    A: float
    theta: float
    r: np.ndarray
    omega: np.ndarray
    omega_prime: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    h_zero_displayed: float
    h_zero_prose: float
    band_floor: float
    levels: tuple
    m_matrix: bool

    def u(self, r):
        return _u_closed(r, self.R, self.gamma, self.a, self.C2)[0]

    def u_prime(self, r):
        return _u_closed(r, self.R, self.gamma, self.a, self.C2)[1]

    @property
    def sandwich_slack(self) -> float:
        return float(min(np.min(self.omega - self.lower), np.min(self.upper - self.omega)))

    def maximum_principle_ok(self) -> bool:
        return bool(np.all(self.omega >= 0.0) and np.all(self.omega <= 1.0))


def _u_closed(r, R, gamma, a, C2):
    r = np.asarray(r, dtype=float)
    K = 1.0 / (gamma ** (a + 1.0) * R * R)
    quad = K * (r * r - R * R) / (2.0 * (a + 1.0))
    dquad = K * r / (a + 1.0)
    if abs(a - 1.0) < 1e-14:
        return 1.0 + C2 * np.log(r / R) + quad, C2 / r + dquad
    return 1.0 + C2 * (r ** (1.0 - a) - R ** (1.0 - a)) + quad, C2 * (1.0 - a) * r ** (-a) + dquad


def _alpha2_C2(R, gamma, a):
    lead = 1.0 + (gamma**2 - 1.0) / (2.0 * (a + 1.0) * gamma ** (a + 1.0))
    if abs(a - 1.0) < 1e-14:
        return -lead / math.log(gamma)
    return lead / ((1.0 - gamma ** (1.0 - a)) * R ** (1.0 - a))


def alpha2_theta(kappa: float, d: int, gamma: float, R: float = 1.0):
    """``theta`` solving ``h(theta) = 1/(16 gamma^(a+1) (a+1))`` on ``(0, (gamma-1)/2)``.

    ``h`` does not involve ``R``; the argument only documents that.
    """
    a = alpha2_exponent(kappa, d)
    h = alpha2_theta_function(a, gamma)
    floor = 1.0 / (16.0 * gamma ** (a + 1.0) * (a + 1.0))
    top = (gamma - 1.0) / 2.0
    h0, h1 = h(0.0), h(top)
    if not (h0 > floor > h1):
        raise CutoffError(
            f"h(theta) - floor not bracketed on (0, {top:g}): h(0)={h0:.6g}, h({top:g})={h1:.6g}, floor={floor:.6g}"
        )
    theta = brentq(lambda t: h(t) - floor, 0.0, top, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return float(theta), floor, h0


def build_cutoff_alpha2(kappa: float, d: int, R: float, gamma: float, *, n: int = 2000, degree: int = 5):
    """Sharp annulus construction; returns ``(AnnulusSolution, CutoffProfile)``."""
    if not R > 0:
        raise CutoffError("R must be positive")
    if not gamma > 1:
        raise CutoffError("gamma must exceed 1")
    a = alpha2_exponent(kappa, d)
    K = 1.0 / (gamma ** (a + 1.0) * R * R)
    C2 = _alpha2_C2(R, gamma, a)
    A = 1.0 / (2.0 * (a + 1.0) * gamma ** (a + 1.0) * R * R)
    theta, floor, h0 = alpha2_theta(kappa, d, gamma, R)
    prose = (gamma - 1.0) ** 2 / (2.0 * gamma ** (a + 1.0) * (2.0 * gamma - 1.0) ** 2 * (a + 1.0))

    hi_level = float(_u_closed((1.0 + theta) * R, R, gamma, a, C2)[0])
    lo_level = 1.0 - A * ((gamma - 1.0 - theta) * R / (gamma - 1.0)) ** 2
    # omega is convex with |omega'| <= |u'(R)|, so the step in omega spans at
    # least (hi - lo) / |u'(R)| in r; keep 16 cells across it
    width = (hi_level - lo_level) / abs(float(_u_closed(R, R, gamma, a, C2)[1]))
    n = max(n, int(math.ceil(16.0 * (gamma - 1.0) * R / width)))

    prof = CurvatureProfile.standard(kappa, 2.0)
    w = solve_warping(prof, RadialGrid.uniform(gamma * R, max(256, int(math.ceil(64 * gamma * R)))))
    r_f = np.linspace(R, gamma * R, 2 * n + 1)
    hh, hp = w.evaluate(r_f)
    H = (d - 1) * hp / hh
    fine = solve_dirichlet(r_f, H, 0.0, K, 1.0, 0.0)
    coarse = solve_dirichlet(r_f[::2], H[::2], 0.0, K, 1.0, 0.0)
    r = r_f[::2]
    omega = (4.0 * fine.values[::2] - coarse.values) / 3.0
    dx = r[1] - r[0]
    omega_p = _d1(omega, dx)
    lower = _u_closed(r, R, gamma, a, C2)[0]
    upper = 1.0 - A * ((r - R) / (2.0 * (gamma - 1.0))) ** 2
    ann = AnnulusSolution(
        float(R), float(gamma), a, C2, A, theta, r, omega, omega_p, lower, upper,
        h0, prose, floor, (lo_level, hi_level), coarse.m_matrix and fine.m_matrix,
    )
    step = SmoothStep(lo_level, hi_level, degree, rising=True)
    phi_a, dphi_a, lap_a = _compose(step, omega, omega_p, np.full_like(omega, K))
    n_in = max(16, int(math.ceil(R / dx)))
    r_in = np.linspace(0.0, R, n_in + 1)[:-1]
    rr = np.concatenate((r_in, r))
    phi = np.concatenate((np.ones_like(r_in), phi_a))
    dphi = np.concatenate((np.zeros_like(r_in), dphi_a))
    lap = np.concatenate((np.zeros_like(r_in), lap_a))
    cut = CutoffProfile(float(R), float(gamma), 2.0, rr, phi, dphi, lap, float(R), float(gamma * R))
    return ann, cut


# -- sequences ----------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class CutoffSequence:
    levels: tuple
    profiles: tuple
    level_radii: tuple
    alpha: float

    @property
    def sup_grads(self) -> np.ndarray:
        return np.array([p.sup_grad for p in self.profiles])

    @property
    def sup_laps(self) -> np.ndarray:
        return np.array([p.sup_lap for p in self.profiles])

    def nested(self) -> bool:
        """``closure{phi_n > 0}`` inside ``{phi_(n+1) = 1}`` for every ``n``."""
        for a, b in zip(self.profiles[:-1], self.profiles[1:]):
            n = min(a.phi.size, b.phi.size)
            if a.phi.size > n and np.any(a.phi[n:] > 0):
                return False
            if np.any(b.phi[:n][a.phi[:n] > 0] != 1.0):
                return False
        return True

    def ratios_ok(self) -> bool:
        c = self.levels
        return all(abs(c[i + 1] / c[i] - 2.0) <= 1.0 / (i + 1) for i in range(len(c) - 1))

    def decay_constants(self):
        """``max_n sup|phi_n'| n^(1/beta)`` and ``max_n sup|Lap phi_n| n^((1+alpha/2)/beta)``."""
        if self.alpha >= 2.0:
            return None, None
        beta = 1.0 - self.alpha / 2.0
        n = np.arange(1, len(self.profiles) + 1)
        return (
            float(np.max(self.sup_grads * n ** (1.0 / beta))),
            float(np.max(self.sup_laps * n ** ((1.0 + self.alpha / 2.0) / beta))),
        )

    def nonincreasing_from_second(self) -> bool:
        g, l = self.sup_grads[1:], self.sup_laps[1:]
        return bool(np.all(np.diff(g) <= 1e-15) and np.all(np.diff(l) <= 1e-15))


def build_sequence(exh: ExhaustionProfile, n_max: int, *, degree: int = 5) -> CutoffSequence:
    """``phi_n = psi_n(r_ex)`` with ``psi_n`` stepping from ``c_n`` to ``c_(n+1)``.

    ``c_1`` exceeds the exhaustion on the unit ball and
    ``c_(n+1) = (2 - 1/(2n)) c_n``, inside the allowed ``[2 - 1/n, 2 + 1/n]``.
    """
    if not -2.0 < exh.alpha <= 2.0:
        raise CutoffError("sequences need alpha in (-2, 2]")
    if n_max < 1:
        raise CutoffError("n_max must be >= 1")
    inner = exh.r <= GLUE_END + 1e-12
    c = [float(np.max(exh.value[inner])) * (1.0 + 1e-9) + 1e-9]
    for n in range(1, n_max + 1):
        c.append(c[-1] * (2.0 - 1.0 / (2.0 * n)))
    if c[-1] > exh.value[-1]:
        raise CutoffError(
            f"exhaustion reaches {exh.value[-1]:.6g} but {n_max} levels need {c[-1]:.6g}; enlarge r_valid"
        )
    profiles = []
    radii = []
    for n in range(n_max):
        step = SmoothStep(c[n], c[n + 1], degree)
        top = exh.level_radius(c[n + 1])
        m = exh.r <= top + 4 * exh.spacing
        phi, dphi, lap = _compose(step, exh.value[m], exh.gradient[m], exh.laplacian[m])
        r_lo = exh.level_radius(c[n])
        radii.append(r_lo)
        profiles.append(CutoffProfile(r_lo, top / r_lo, exh.alpha, exh.r[m], phi, dphi, lap, r_lo, top))
    return CutoffSequence(tuple(c), tuple(profiles), tuple(radii), exh.alpha)


def sweep_summary(profiles) -> list:
    """One JSON-ready record per profile with the sweep-wide fitted constants."""
    c1 = max((p.C1 for p in profiles), default=None)
    c2 = max((p.C2 for p in profiles), default=None)
    return [
        {"R": p.R, "sup_grad": p.sup_grad, "sup_lap": p.sup_lap, "c1_fit": c1, "c2_fit": c2}
        for p in profiles
    ]
