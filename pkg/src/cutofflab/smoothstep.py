"""Polynomial transition functions with certified derivative bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial

__all__ = ["SmoothStep", "smooth_step", "unit_step_polynomial"]

# Ascending monomial coefficients of S on [0,1] with S(0)=0, S(1)=1 and
# vanishing derivatives of order 1..k at both ends (k = (degree-1)/2).
_UNIT = {
    3: (0, 0, 3, -2),
    5: (0, 0, 0, 10, -15, 6),
    7: (0, 0, 0, 0, 35, -84, 70, -20),
}


def unit_step_polynomial(degree: int) -> Polynomial:
    """The rising unit smoothstep of odd degree 3, 5 or 7 on ``[0, 1]``."""
    if degree not in _UNIT:
        raise ValueError(f"degree must be 3, 5 or 7, got {degree}")
    return Polynomial(_UNIT[degree])


def _real_roots_in_unit(p: Polynomial) -> list:
    out = []
    for z in p.roots():
        if abs(z.imag) < 1e-12 and -1e-12 <= z.real <= 1 + 1e-12:
            out.append(min(1.0, max(0.0, float(z.real))))
    return out


def _sup_abs(p: Polynomial) -> float:
    """``max |p|`` on ``[0, 1]`` from the endpoints and the critical points."""
    cand = [0.0, 1.0] + _real_roots_in_unit(p.deriv())
    return max(abs(float(p(t))) for t in cand)


@lru_cache(maxsize=None)
def _unit_bounds(degree: int, width: float):
    """Sup of ``|S'|``, ``|S''|`` and ``|S'|/w + |S''|/w^2`` on ``[0, 1]``.

    The mixed bound is the sup of a piecewise polynomial whose pieces are
    split at the zeros of ``S'`` and ``S''``; on each piece the maximum of
    ``+-S'/w +- S''/w^2`` sits at an endpoint or a critical point.
    """
    S = unit_step_polynomial(degree)
    d1 = S.deriv()
    d2 = d1.deriv()
    b1 = _sup_abs(d1)
    b2 = _sup_abs(d2)
    cuts = sorted(set([0.0, 1.0] + _real_roots_in_unit(d1) + _real_roots_in_unit(d2)))
    best = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        s1 = math.copysign(1.0, float(d1(mid)))
        s2 = math.copysign(1.0, float(d2(mid)))
        q = s1 * d1 / width + s2 * d2 / width**2
        pts = [lo, hi] + [t for t in _real_roots_in_unit(q.deriv()) if lo <= t <= hi]
        best = max(best, max(float(q(t)) for t in pts))
    return b1, b2, best


@dataclass(frozen=True)
class SmoothStep:
    """``1`` left of ``a``, ``0`` right of ``b``, polynomial in between.

    With ``rising=True`` the step is mirrored: ``0`` left of ``a`` and ``1``
    right of ``b``.  Degree 5 and 7 steps are C^2 across both knots.
    """

    a: float
    b: float
    degree: int = 5
    rising: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or not self.b > self.a:
            raise ValueError(f"degenerate transition interval [{self.a}, {self.b}]")
        unit_step_polynomial(self.degree)

    @property
    def width(self) -> float:
        return self.b - self.a

    def _unit(self, x):
        t = np.clip((np.asarray(x, dtype=float) - self.a) / self.width, 0.0, 1.0)
        inside = (np.asarray(x) > self.a) & (np.asarray(x) < self.b)
        return t, inside

    def __call__(self, x):
        t, _ = self._unit(x)
        S = unit_step_polynomial(self.degree)(t)
        out = S if self.rising else 1.0 - S
        return out if np.ndim(x) else float(out)

    def derivative(self, x, order: int = 1):
        """First or second derivative; zero off the transition interval."""
        if order not in (1, 2):
            raise ValueError("order must be 1 or 2")
        t, inside = self._unit(x)
        p = unit_step_polynomial(self.degree).deriv(order)
        val = np.where(inside, p(t), 0.0) / self.width**order
        if not self.rising:
            val = -val
        return val if np.ndim(x) else float(val)

    @property
    def sup_first(self) -> float:
        """Exact ``sup |psi'|`` (``15/(8 w)`` for the quintic)."""
        return _unit_bounds(self.degree, 1.0)[0] / self.width

    @property
    def sup_second(self) -> float:
        """Exact ``sup |psi''|`` (``10/(sqrt(3) w^2)`` for the quintic)."""
        return _unit_bounds(self.degree, 1.0)[1] / self.width**2

    @property
    def sup_sum(self) -> float:
        """Exact ``sup (|psi'| + |psi''|)`` over the transition interval."""
        return _unit_bounds(self.degree, float(self.width))[2]


def smooth_step(a: float, b: float, a_target: float | None = None, *, degree: int = 5, rising=False) -> SmoothStep:
    """Build a step on ``[a, b]`` and optionally require ``|psi'| + |psi''| <= a_target``."""
    step = SmoothStep(float(a), float(b), degree, rising)
    if a_target is not None and step.sup_sum > a_target:
        raise ValueError(
            f"derivative bound {step.sup_sum:.6g} exceeds target {a_target:.6g} on an interval of width {step.width:.6g}"
        )
    return step
