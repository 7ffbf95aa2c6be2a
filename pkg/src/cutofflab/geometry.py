"""Warping function, ball volumes and Laplacian comparison on model manifolds.

The model manifold attached to a curvature profile ``G`` carries the metric
``dr^2 + h(r)^2 dxi^2`` with ``h'' = G h``, ``h(0) = 0``, ``h'(0) = 1``.
One warping solve serves every dimension ``d``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from ._ode import IntegrationError, integrate_on_nodes
from .profiles import CurvatureProfile, DomainError, RadialGrid

__all__ = [
    "Warping",
    "ModelManifold",
    "VolumeTable",
    "BishopGromovReport",
    "sphere_area",
    "solve_warping",
    "volume_ball",
    "volume_table",
    "laplacian_comparison",
    "bishop_gromov_ratio_check",
    "IntegrationError",
    "LogDerivative",
]

SERIES_LAUNCH = 1e-4


def sphere_area(d: int) -> float:
    """Surface measure ``2 pi^(d/2) / Gamma(d/2)`` of the unit (d-1)-sphere."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def _quintic_hermite(t, dx, f0, d0, s0, f1, d1, s1):
    """Value and x-derivative of the quintic matching f, f', f'' at both ends."""
    t2 = t * t
    t3 = t2 * t
    t4 = t3 * t
    t5 = t4 * t
    h0 = 1 - 10 * t3 + 15 * t4 - 6 * t5
    h1 = t - 6 * t3 + 8 * t4 - 3 * t5
    h2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5)
    h3 = 10 * t3 - 15 * t4 + 6 * t5
    h4 = -4 * t3 + 7 * t4 - 3 * t5
    h5 = 0.5 * (t3 - 2 * t4 + t5)
    g0 = -30 * t2 + 60 * t3 - 30 * t4
    g1 = 1 - 18 * t2 + 32 * t3 - 15 * t4
    g2 = 0.5 * (2 * t - 9 * t2 + 12 * t3 - 5 * t4)
    g3 = -g0
    g4 = -12 * t2 + 28 * t3 - 15 * t4
    g5 = 0.5 * (3 * t2 - 8 * t3 + 5 * t4)
    val = h0 * f0 + dx * h1 * d0 + dx * dx * h2 * s0 + h3 * f1 + dx * h4 * d1 + dx * dx * h5 * s1
    der = (g0 * f0 + dx * g1 * d0 + dx * dx * g2 * s0 + g3 * f1 + dx * g4 * d1 + dx * dx * g5 * s1) / dx
    return val, der


@dataclass(frozen=True, eq=False)
class Warping:
    """Samples of ``h``, ``h'`` and ``h''`` on a radial grid.

    Between nodes ``h`` is reconstructed by quintic Hermite interpolation,
    which is sixth-order accurate and exact for ``h(r) = r``.
    """

    grid: RadialGrid
    h: np.ndarray
    h_prime: np.ndarray
    h_second: np.ndarray
    profile: CurvatureProfile | None = None

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def r_max(self) -> float:
        return self.grid.r_max

    def evaluate(self, r):
        """Return ``(h(r), h'(r))`` at arbitrary radii inside the grid."""
        r_arr = np.atleast_1d(np.asarray(r, dtype=float))
        nodes = self.grid.nodes
        if np.any(r_arr < nodes[0] - 1e-12 * max(1.0, nodes[-1])) or np.any(
            r_arr > nodes[-1] * (1 + 1e-14) + 1e-300
        ):
            raise DomainError(f"radius outside warping grid [{nodes[0]}, {nodes[-1]}]")
        r_arr = np.clip(r_arr, nodes[0], nodes[-1])
        idx = np.clip(np.searchsorted(nodes, r_arr, side="right") - 1, 0, nodes.size - 2)
        a = nodes[idx]
        dx = nodes[idx + 1] - a
        t = (r_arr - a) / dx
        val, der = _quintic_hermite(
            t, dx,
            self.h[idx], self.h_prime[idx], self.h_second[idx],
            self.h[idx + 1], self.h_prime[idx + 1], self.h_second[idx + 1],
        )
        exact = r_arr == nodes[idx]
        val = np.where(exact, self.h[idx], val)
        der = np.where(exact, self.h_prime[idx], der)
        if np.ndim(r) == 0:
            return float(val[0]), float(der[0])
        return val, der

    def log_derivative(self, r):
        """``h'(r) / h(r)`` for ``r > 0``."""
        h, hp = self.evaluate(r)
        return hp / h

    def mean_curvature(self, r, d: int):
        """``(d-1) h'/h``: the Laplacian of the distance from the pole."""
        return (d - 1) * self.log_derivative(r)

    def mean_curvature_derivative(self, r, d: int):
        """``d/dr [(d-1) h'/h] = (d-1) (G - (h'/h)^2)``."""
        if self.profile is None:
            raise ValueError("curvature profile required for the derivative")
        q = self.log_derivative(r)
        return (d - 1) * (self.profile.evaluate(r) - q * q)


@dataclass(frozen=True, eq=False)
class ModelManifold:
    """A warping solution paired with a dimension ``d >= 2``."""

    warping: Warping
    d: int

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.d}")

    @property
    def grid(self) -> RadialGrid:
        return self.warping.grid

    @property
    def h(self) -> np.ndarray:
        return self.warping.h

    @property
    def h_prime(self) -> np.ndarray:
        return self.warping.h_prime

    def volume(self, R: float) -> float:
        return volume_ball(self.warping, self.d, R)

    def laplacian_of_distance(self, r):
        return laplacian_comparison(self.warping, self.d, r)

    def area_density(self, r):
        """``C(d) h(r)^(d-1)``: area of the sphere of radius ``r``."""
        h, _ = self.warping.evaluate(r)
        return sphere_area(self.d) * h ** (self.d - 1)


def solve_warping(
    profile: CurvatureProfile,
    grid: RadialGrid,
    *,
    rtol: float = 1e-10,
    fixed_step: bool = False,
) -> Warping:
    """Solve ``h'' = G h``, ``h(0)=0``, ``h'(0)=1`` on the grid nodes.

    The first stretch ``[0, s0]`` with ``s0 = min(r_1, 1e-4)`` is covered by
    the series ``h = s + G(0) s^3/6``; the rest by Dormand-Prince steps.
    ``fixed_step=True`` takes one step per grid interval (refinement studies).
    """
    nodes = grid.nodes
    if nodes[0] != 0.0:
        raise ValueError("the warping grid must start at r = 0")
    if not profile.covers(nodes[-1]):
        raise DomainError(
            f"profile domain {profile.domain[:2]} is shorter than the grid (r_max={nodes[-1]})"
        )
    g0 = float(profile.evaluate(0.0))
    s0 = min(nodes[1], SERIES_LAUNCH)
    y0 = np.array([s0 + g0 * s0**3 / 6.0, 1.0 + g0 * s0**2 / 2.0])

    G = profile.scalar_function()

    def rhs(s, y):
        return np.array([y[1], G(s) * y[0]])

    tail = nodes[1:] if s0 == nodes[1] else np.concatenate(([s0], nodes[1:]))
    ys = integrate_on_nodes(rhs, y0, tail, rtol=rtol, adaptive=not fixed_step)
    if s0 != nodes[1]:
        ys = ys[1:]
    h = np.concatenate(([0.0], ys[:, 0]))
    hp = np.concatenate(([1.0], ys[:, 1]))
    hpp = profile.evaluate(nodes) * h
    for arr in (h, hp, hpp):
        arr.setflags(write=False)
    return Warping(grid, h, hp, hpp, profile)


def _density_derivatives(h, hp, hpp, d):
    """``f = h^(d-1)`` and its first two derivatives, safe at ``h = 0``."""
    k = d - 1
    f = h**k
    f1 = k * h ** (k - 1) * hp
    if k == 1:
        f2 = hpp.copy() if isinstance(hpp, np.ndarray) else hpp
    else:
        f2 = k * (k - 1) * h ** (k - 2) * hp**2 + k * h ** (k - 1) * hpp
    return f, f1, f2


def _hermite_integral(a, b, fa, da, sa, fb, db, sb):
    """Exact integral of the quintic Hermite interpolant on ``[a, b]``."""
    dx = b - a
    return dx * (fa + fb) / 2.0 + dx**2 * (da - db) / 10.0 + dx**3 * (sa + sb) / 120.0


def _cumulative_density_integral(w: Warping, d: int) -> np.ndarray:
    nodes = w.grid.nodes
    f, f1, f2 = _density_derivatives(w.h, w.h_prime, w.h_second, d)
    pieces = _hermite_integral(nodes[:-1], nodes[1:], f[:-1], f1[:-1], f2[:-1], f[1:], f1[1:], f2[1:])
    return np.concatenate(([0.0], np.cumsum(pieces)))


def volume_ball(w: Warping, d: int, R: float) -> float:
    """``V_G(R) = C(d) * int_0^R h^(d-1)``.

    Whole intervals use the sixth-order Hermite rule built from ``h, h', h''``;
    a partial last interval uses Hermite-interpolated end values.
    """
    if int(d) != d or d < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {d}")
    nodes = w.grid.nodes
    if R < 0 or R > nodes[-1] * (1 + 1e-14):
        raise DomainError(f"R={R} beyond the warping grid (r_max={nodes[-1]})")
    R = min(float(R), float(nodes[-1]))
    cum = _cumulative_density_integral(w, d)
    i = int(np.searchsorted(nodes, R, side="right") - 1)
    total = cum[i]
    if R > nodes[i]:
        hR, hpR = w.evaluate(R)
        G = w.profile.evaluate(R) if w.profile is not None else None
        if G is None:
            raise ValueError("off-node volume needs the curvature profile")
        hppR = G * hR
        fa, da, sa = _density_derivatives(w.h[i], w.h_prime[i], w.h_second[i], d)
        fb, db, sb = _density_derivatives(hR, hpR, hppR, d)
        total += _hermite_integral(nodes[i], R, fa, da, sa, fb, db, sb)
    return sphere_area(d) * float(total)


@dataclass(frozen=True, eq=False)
class VolumeTable:
    """Ball volumes ``V_G(R)`` at a list of radii.

    ``ratio`` is ``V_G(R)`` divided by the Euclidean ball volume
    ``C(d) R^d / d``; it tends to 1 as ``R -> 0``.
    """

    d: int
    radii: np.ndarray
    volumes: np.ndarray
    c_d: float

    @property
    def ratio(self) -> np.ndarray:
        return self.volumes / (self.c_d * self.radii**self.d / self.d)

    def strictly_increasing(self) -> bool:
        return bool(np.all(np.diff(self.volumes) > 0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["R", "V_G", "ratio"])
        for R, V, q in zip(self.radii, self.volumes, self.ratio):
            wr.writerow([repr(float(R)), repr(float(V)), repr(float(q))])
        return buf.getvalue()


def volume_table(w: Warping, d: int, radii) -> VolumeTable:
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0):
        raise ValueError("volume radii must be positive")
    vols = np.array([volume_ball(w, d, R) for R in radii])
    return VolumeTable(d, radii, vols, sphere_area(d))


def laplacian_comparison(w: Warping, d: int, r):
    """Upper bound ``(d-1) h'(r)/h(r)`` on the Laplacian of the distance."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr <= 0):
        raise ValueError("the Laplacian comparison is singular at r = 0")
    return w.mean_curvature(r, d)


@dataclass(frozen=True)
class BishopGromovReport:
    radii: tuple
    ratios: tuple
    nonincreasing: bool
    max_increase: float
    precondition_ok: bool
    first_precondition_violation: float | None
    tolerance: float


def bishop_gromov_ratio_check(
    profile_low: CurvatureProfile,
    profile_high: CurvatureProfile,
    d: int,
    radii,
    *,
    grid: RadialGrid | None = None,
    tol: float = 1e-9,
) -> BishopGromovReport:
    """Check that ``R -> V_low(R) / V_high(R)`` is nonincreasing.

    The ordering ``G_low <= G_high`` is tested on the grid nodes; a failure
    is recorded in the report rather than raised.
    """
    radii = np.asarray(sorted(float(R) for R in radii))
    if grid is None:
        grid = RadialGrid.uniform(float(radii[-1]), max(400, int(100 * radii[-1])))
    g_low = profile_low.evaluate(grid.nodes)
    g_high = profile_high.evaluate(grid.nodes)
    bad = np.nonzero(g_low > g_high + 1e-15 * np.maximum(1.0, g_high))[0]
    w_low = solve_warping(profile_low, grid)
    w_high = solve_warping(profile_high, grid)
    ratios = np.array([volume_ball(w_low, d, R) / volume_ball(w_high, d, R) for R in radii])
    steps = np.diff(ratios)
    max_inc = float(steps.max()) if steps.size else 0.0
    return BishopGromovReport(
        radii=tuple(radii.tolist()),
        ratios=tuple(ratios.tolist()),
        nonincreasing=bool(max_inc <= tol),
        max_increase=max_inc,
        precondition_ok=bad.size == 0,
        first_precondition_violation=float(grid.nodes[bad[0]]) if bad.size else None,
        tolerance=tol,
    )


class LogDerivative:
    """``h'/h`` on ``(0, R]`` without forming ``h``.

    Near the pole the warping is integrated directly; from ``r = 2`` on the
    Riccati equation ``q' = G - q^2`` is integrated instead, which stays
    finite where ``h`` itself overflows.
    """

    SWITCH = 2.0

    def __init__(self, profile: CurvatureProfile, R: float):
        self.profile = profile
        self.R = float(R)
        top = min(self.R, self.SWITCH)
        self._warp = solve_warping(profile, RadialGrid.uniform(top, 256))
        self._tail = None
        if self.R > self.SWITCH:
            q0 = float(self._warp.log_derivative(self.SWITCH))
            sol = solve_ivp(
                lambda t, y: profile.evaluate(t) - y * y,
                (self.SWITCH, self.R), [q0], method="DOP853",
                rtol=1e-12, atol=1e-14, dense_output=True,
            )
            if not sol.success:
                raise IntegrationError(f"log-derivative solve failed: {sol.message}")
            self._tail = sol.sol

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        near = r <= self.SWITCH
        if np.any(near):
            out[near] = self._warp.log_derivative(r[near])
        if np.any(~near):
            out[~near] = self._tail(r[~near])[0]
        return out
