"""Li-Yau type gradient bounds for radial solutions of ``Lap w = f1(r) f2(w)``.

The bound has the form ``|w'|^2 / w^2 <= B`` on the annulus
``R1 < r < gamma R1`` with
``B = max{O1, (4 d O2 + sqrt((4 d O2)^2 + 4 O3)) / 2}``, where the three
constants are maxima over the enlarged band ``[(1-t) R1, (gamma+t) R1]``.
``A1(t)`` comes from the localizing bump: a decreasing quintic step of width
``t R1`` satisfying ``|psi'| <= A1 sqrt(psi) / R1`` and
``|psi''| <= A1 / R1^2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .dirichlet import solve_dirichlet, uniform_first_derivative
from .geometry import LogDerivative
from .profiles import CurvatureProfile
from .smoothstep import unit_step_polynomial

__all__ = [
    "PoissonProblem",
    "PoissonSolution",
    "EstimateBounds",
    "VerificationReport",
    "DEFAULT_LAMBDAS",
    "bump_constant",
    "compute_bounds",
    "solve_radial_poisson",
    "verify_gradient_estimate",
]

DEFAULT_LAMBDAS = tuple(np.round(np.linspace(0.05, 0.95, 19), 10))


@dataclass(frozen=True)
class PoissonProblem:
    """``Lap w = f1(r) f2(w)`` on an annulus, with ``|grad zeta| <= L`` for ``zeta = r``.

    ``kind`` is ``"linear"`` (``f2(w) = coeff * w``) or ``"constant"``
    (``f2 = coeff``); both are what the radial solver handles.
    """

    f1: Callable
    f1_prime: Callable
    f2: Callable
    f2_prime: Callable
    R0: float
    R1: float
    gamma: float
    t: float
    kind: str = "linear"
    coeff: float = 1.0
    lipschitz: float = 1.0
    label: str = ""

    def __post_init__(self):
        if not self.R1 > self.R0 > 0:
            raise ValueError(f"need R1 > R0 > 0, got R0={self.R0}, R1={self.R1}")
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if not self.t > 0 or not (1.0 - self.t) * self.R1 > self.R0:
            raise ValueError(f"t={self.t} is not admissible: need t > 0 and (1-t) R1 > R0")
        if self.kind not in ("linear", "constant"):
            raise ValueError(f"kind must be 'linear' or 'constant', got {self.kind!r}")

    @property
    def band(self) -> tuple:
        return (1.0 - self.t) * self.R1, (self.gamma + self.t) * self.R1

    @property
    def check_annulus(self) -> tuple:
        return self.R1, self.gamma * self.R1

    @classmethod
    def linear_reaction(cls, alpha: float, R1: float, gamma: float, t: float, R0: float | None = None):
        """``Lap w = w / r^alpha``."""
        R0 = (1.0 - t) * R1 / 2.0 if R0 is None else R0
        return cls(
            f1=lambda r: r ** (-alpha),
            f1_prime=lambda r: -alpha * r ** (-alpha - 1.0),
            f2=lambda w: w,
            f2_prime=lambda w: np.ones_like(w),
            R0=R0, R1=R1, gamma=gamma, t=t, kind="linear", coeff=1.0,
            label=f"linear alpha={alpha}",
        )

    @classmethod
    def constant_source(cls, alpha: float, R1: float, gamma: float, t: float, R0: float | None = None):
        """``Lap w = 1 / R1^alpha`` (constant right-hand side)."""
        R0 = (1.0 - t) * R1 / 2.0 if R0 is None else R0
        level = R1 ** (-alpha)
        return cls(
            f1=lambda r: np.full_like(np.asarray(r, dtype=float), level),
            f1_prime=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            f2=lambda w: np.ones_like(w),
            f2_prime=lambda w: np.zeros_like(w),
            R0=R0, R1=R1, gamma=gamma, t=t, kind="constant", coeff=1.0,
            label=f"constant alpha={alpha}",
        )


@dataclass(frozen=True, eq=False)
class PoissonSolution:
    r: np.ndarray
    omega: np.ndarray
    omega_prime: np.ndarray

    def log_gradient_sq(self) -> np.ndarray:
        return (self.omega_prime / self.omega) ** 2

    def restrict(self, lo: float, hi: float, *, open_ends: bool = False):
        if open_ends:
            m = (self.r > lo) & (self.r < hi)
        else:
            m = (self.r >= lo - 1e-12) & (self.r <= hi + 1e-12)
        return self.r[m], self.omega[m], self.omega_prime[m]


def solve_radial_poisson(
    problem: PoissonProblem,
    profile: CurvatureProfile,
    d: int,
    *,
    outer: float | None = None,
    boundary=(1.0, None),
    n: int = 4000,
    lift_to: float | None = None,
) -> PoissonSolution:
    """Second-order central differences for ``w'' + (d-1)(h'/h) w' = f1 f2``.

    The domain is ``[R0, outer]`` (``outer`` defaults to ``2 (gamma+t) R1``)
    on ``n`` uniform intervals.  A right boundary value of ``None`` selects
    the decaying solution through the Robin condition
    ``w'/w = -(H + sqrt(H^2 + 4 f1 coeff))/2`` (linear case only).  ``lift_to`` adds the harmonic-free constant
    that makes ``min w`` equal to it (constant right-hand side only, where
    constants solve the homogeneous equation).
    """
    lo = problem.R0
    hi = 2.0 * problem.band[1] if outer is None else outer
    if hi <= problem.band[1]:
        raise ValueError("outer radius must lie beyond the band")
    r = np.linspace(lo, hi, n + 1)
    H = (d - 1) * LogDerivative(profile, hi)(r)
    f1 = problem.f1(r)
    robin = None
    if boundary[1] is None:
        if problem.kind != "linear":
            raise ValueError("the decaying outer condition needs a linear right-hand side")
        rate = problem.coeff * f1[-1]
        robin = -(H[-1] + math.sqrt(H[-1] ** 2 + 4.0 * rate)) / 2.0
    right = 0.0 if boundary[1] is None else boundary[1]
    if problem.kind == "linear":
        sol = solve_dirichlet(r, H, problem.coeff * f1, 0.0, boundary[0], right, robin=robin)
    else:
        sol = solve_dirichlet(r, H, 0.0, problem.coeff * f1, boundary[0], right, robin=robin)
    w = sol.values.copy()
    if lift_to is not None:
        if problem.kind != "constant":
            raise ValueError("lifting by a constant only preserves constant right-hand sides")
        w += lift_to - np.min(w)
    band = (r >= problem.band[0] - 1e-12) & (r <= problem.band[1] + 1e-12)
    if np.any(w[band] <= 0):
        raise ValueError("non-positive discrete solution on the band")
    wp = uniform_first_derivative(w, r[1] - r[0])
    return PoissonSolution(r, w, wp)


@lru_cache(maxsize=None)
def _unit_bump_ratios(degree: int):
    """``sup |S'| / sqrt(S)`` and ``sup |S''|`` for the decreasing unit step."""
    rise = unit_step_polynomial(degree)
    S = 1.0 - rise
    d1 = -rise.deriv()
    d2 = -rise.deriv(2)
    u = np.linspace(0.0, 1.0, 20001)[1:-1]
    ratio = np.abs(d1(u)) / np.sqrt(S(u))
    k = int(np.argmax(ratio))
    res = minimize_scalar(
        lambda x: -abs(d1(x)) / math.sqrt(S(x)),
        bounds=(u[max(k - 1, 0)], u[min(k + 1, u.size - 1)]), method="bounded",
        options={"xatol": 1e-13},
    )
    first = max(float(ratio[k]), float(-res.fun))
    crit = [z.real for z in d2.deriv().roots() if abs(z.imag) < 1e-12 and 0 <= z.real <= 1]
    second = max(abs(float(d2(x))) for x in [0.0, 1.0] + crit)
    return first, second


def bump_constant(t: float, degree: int = 5) -> float:
    """Smallest ``A1`` with ``|psi'| <= A1 sqrt(psi)/R1`` and ``|psi''| <= A1/R1^2``
    for the step of width ``t R1``; independent of ``R1``."""
    if not t > 0:
        raise ValueError("t must be positive")
    first, second = _unit_bump_ratios(degree)
    return max(first / t, second / t**2)


@dataclass(frozen=True)
class EstimateBounds:
    omega1: float
    omega2: float
    omega3: float
    g_bar: float
    a1: float
    lam: float
    B: float
    omega2_terms: dict = field(default_factory=dict)
    by_lambda: tuple = ()
    d: int = 3

    def quadratic_branch(self) -> float:
        q = 4.0 * self.d * self.omega2
        return (q + math.sqrt(q * q + 4.0 * self.omega3)) / 2.0


def _assemble(d, omega1, omega2, omega3):
    q = 4.0 * d * omega2
    return max(omega1, (q + math.sqrt(q * q + 4.0 * omega3)) / 2.0)


def compute_bounds(
    problem: PoissonProblem,
    solution: PoissonSolution,
    d: int,
    profile: CurvatureProfile,
    lambdas=DEFAULT_LAMBDAS,
    *,
    degree: int = 5,
) -> EstimateBounds:
    """Evaluate the three band maxima and pick ``lambda`` minimizing ``B``.

    The reaction term uses ``max{f2(w)/w - f2'(w), 0}``, an upper bound for
    either sign convention of that term.
    """
    lo, hi = problem.band
    r, w, _ = solution.restrict(lo, hi)
    step = float(np.max(np.diff(solution.r)))
    if r.size < 2 or r[0] - lo > step or hi - r[-1] > step:
        raise ValueError("solution samples do not cover the band")
    if np.any(w <= 0):
        raise ValueError("omega must be positive on the band")
    R1 = problem.R1
    L = problem.lipschitz
    f1 = np.asarray(problem.f1(r), dtype=float)
    df1 = np.abs(np.asarray(problem.f1_prime(r), dtype=float))
    f2 = np.asarray(problem.f2(w), dtype=float)
    df2 = np.asarray(problem.f2_prime(w), dtype=float)
    g_samples = profile.evaluate(np.linspace(lo, hi, 2001))
    g_bar = max(0.0, float(np.max(g_samples)))
    a1 = bump_constant(problem.t, degree)

    omega1 = float(np.max(f1 * f2 / w))
    fixed = {
        "bump_laplacian": a1 / R1 * (1.0 / R1 + 4.0 * (d - 1) * max(math.sqrt(g_bar), 1.0 / R1)),
        "bump_gradient": (2.0 + 4.0 * d) * a1 / R1**2,
        "curvature": 2.0 * (d - 1) * g_bar,
    }
    reaction = 2.0 * f1 * np.maximum(f2 / w - df2, 0.0)
    best = None
    table = []
    for lam in lambdas:
        lam = float(lam)
        source = 2.0 * L * df1 ** (2.0 * lam) * np.abs(f2) / w
        o2 = sum(fixed.values()) + float(np.max(reaction + source))
        o3 = float(np.max(L * df1 ** (2.0 * (1.0 - lam)) * np.abs(f2) / w))
        B = _assemble(d, omega1, o2, o3)
        terms = dict(fixed, reaction=float(np.max(reaction)), source=float(np.max(source)))
        table.append((lam, B))
        if best is None or B < best[3]:
            best = (lam, o2, o3, B, terms)
    lam, o2, o3, B, terms = best
    return EstimateBounds(omega1, o2, o3, g_bar, a1, lam, B, terms, tuple(table), int(d))


@dataclass(frozen=True)
class VerificationReport:
    R1: float
    gamma: float
    t: float
    lam: float
    omega1: float
    omega2: float
    omega3: float
    B: float
    sup_lhs: float
    margin_min: float
    violations: int
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "R1": self.R1, "gamma": self.gamma, "t": self.t, "lambda": self.lam,
            "Omega1": self.omega1, "Omega2": self.omega2, "Omega3": self.omega3,
            "B": self.B, "sup_lhs": self.sup_lhs, "margin_min": self.margin_min,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def verify_gradient_estimate(
    problem: PoissonProblem, solution: PoissonSolution, bounds: EstimateBounds, *, rel_tol: float = 1e-6
) -> VerificationReport:
    """Check ``(w'/w)^2 <= B`` at every node strictly inside ``(R1, gamma R1)``."""
    lo, hi = problem.check_annulus
    r, w, wp = solution.restrict(lo, hi, open_ends=True)
    lhs = (wp / w) ** 2
    margin = bounds.B - lhs
    violations = int(np.sum(margin < -rel_tol * bounds.B))
    return VerificationReport(
        problem.R1, problem.gamma, problem.t, bounds.lam, bounds.omega1, bounds.omega2,
        bounds.omega3, bounds.B, float(np.max(lhs)), float(np.min(margin)), violations, rel_tol,
    )
