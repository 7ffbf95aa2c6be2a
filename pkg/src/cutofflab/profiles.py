"""Radial curvature profiles and radial grids.

A curvature profile is the function ``G`` in the radial Ricci lower bound
``Ric >= -(d-1) G(r)``.  The warping function of the associated model
manifold solves ``h'' = G h``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator

__all__ = ["CurvatureProfile", "RadialGrid", "DomainError"]


class DomainError(ValueError):
    """Raised when a profile is evaluated outside its domain."""


@dataclass(frozen=True, eq=False)
class CurvatureProfile:
    """Nonnegative radial function ``G`` on ``[0, r_end)`` or ``[0, r_end]``.

    Use the classmethod constructors; the raw fields are an implementation
    detail.

    Parameters
    ----------
    kind : str
        One of ``standard``, ``constant``, ``power_tail``, ``tabulated``.
    params : dict
        Kind-specific parameters.
    """

    kind: str
    params: dict = field(default_factory=dict)
    _interp: Callable | None = field(default=None, repr=False)

    # -- constructors -----------------------------------------------------
    @classmethod
    def standard(cls, kappa: float, alpha: float, center: float = 0.0) -> "CurvatureProfile":
        """``G(r) = kappa^2 / (1 + (r - center)^2)^(alpha/2)``.

        ``center`` is nonzero only for the off-pole comparison problem, where
        the bound is seen from a point at distance ``center`` from the pole.
        """
        kappa = float(kappa)
        alpha = float(alpha)
        if kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {kappa}")
        if not -2.0 <= alpha <= 2.0:
            raise ValueError(f"alpha must lie in [-2, 2], got {alpha}")
        return cls("standard", {"kappa": kappa, "alpha": alpha, "center": float(center)})

    @classmethod
    def constant(cls, kappa_sq: float) -> "CurvatureProfile":
        """``G(r) = kappa_sq`` everywhere."""
        if kappa_sq < 0:
            raise ValueError(f"constant curvature bound must be >= 0, got {kappa_sq}")
        return cls("constant", {"value": float(kappa_sq)})

    @classmethod
    def power_tail(cls, kappa: float, alpha: float, r0: float, shift: float = 0.0) -> "CurvatureProfile":
        """``G(s) = kappa^2 / (shift + r0 - s)^alpha`` on ``[0, r0)``.

        With ``shift = 0`` this is the coefficient of the comparison problem
        whose closed forms live in :mod:`cutofflab.comparison`.  A positive
        ``shift`` keeps the coefficient finite at ``s = r0`` and extends the
        domain to ``[0, r0]``.
        """
        if kappa < 0:
            raise ValueError(f"kappa must be >= 0, got {kappa}")
        if not -2.0 <= alpha <= 2.0:
            raise ValueError(f"alpha must lie in [-2, 2], got {alpha}")
        if r0 <= 0:
            raise ValueError(f"r0 must be positive, got {r0}")
        if shift < 0:
            raise ValueError(f"shift must be >= 0, got {shift}")
        return cls(
            "power_tail",
            {"kappa": float(kappa), "alpha": float(alpha), "r0": float(r0), "shift": float(shift)},
        )

    @classmethod
    def tabulated(cls, r, values) -> "CurvatureProfile":
        """Monotone cubic (PCHIP) interpolation of samples ``G(r_i)``.

        PCHIP keeps the interpolant inside the range of neighbouring samples,
        so nonnegativity and samplewise ordering of two tables carry over to
        the interpolants.
        """
        r = np.asarray(r, dtype=float)
        values = np.asarray(values, dtype=float)
        if r.ndim != 1 or r.shape != values.shape or r.size < 2:
            raise ValueError("tabulated profile needs matching 1-D arrays of length >= 2")
        if np.any(np.diff(r) <= 0):
            raise ValueError("tabulation radii must be strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("tabulated values must be finite and >= 0")
        interp = PchipInterpolator(r, values, extrapolate=False)
        return cls("tabulated", {"r": r, "values": values}, interp)

    # -- evaluation -------------------------------------------------------
    @property
    def domain(self) -> tuple[float, float, bool]:
        """``(start, end, end_included)``."""
        if self.kind in ("standard", "constant"):
            return 0.0, np.inf, False
        if self.kind == "power_tail":
            p = self.params
            return 0.0, p["r0"], p["shift"] > 0 or p["alpha"] <= 0
        r = self.params["r"]
        return float(r[0]), float(r[-1]), True

    def covers(self, r_max: float) -> bool:
        start, end, closed = self.domain
        if start > 0:
            return False
        return r_max < end or (closed and r_max <= end)

    def __call__(self, r):
        return self.evaluate(r)

    def evaluate(self, r):
        """Vectorized ``G(r)``; raises :class:`DomainError` off-domain."""
        r_arr = np.asarray(r, dtype=float)
        start, end, closed = self.domain
        bad = (r_arr < start) | (r_arr > end) | ((r_arr == end) & (not closed))
        if np.any(bad) or np.any(np.isnan(r_arr)):
            raise DomainError(
                f"{self.kind} profile evaluated outside its domain [{start}, {end}"
                f"{']' if closed else ')'}"
            )
        p = self.params
        if self.kind == "standard":
            out = p["kappa"] ** 2 / (1.0 + (r_arr - p["center"]) ** 2) ** (p["alpha"] / 2.0)
        elif self.kind == "constant":
            out = np.full_like(r_arr, p["value"])
        elif self.kind == "power_tail":
            gap = p["shift"] + p["r0"] - r_arr
            if p["alpha"] == 0:
                out = np.full_like(r_arr, p["kappa"] ** 2)
            else:
                out = p["kappa"] ** 2 * gap ** (-p["alpha"])
        else:
            out = np.maximum(self._interp(r_arr), 0.0)
        return out if np.ndim(r) else float(out)

    def scalar_function(self):
        """Fast unchecked scalar evaluator for use inside ODE right-hand sides.

        The caller is responsible for staying inside :attr:`domain`.
        """
        p = self.params
        if self.kind == "standard":
            k2, half, c = p["kappa"] ** 2, p["alpha"] / 2.0, p["center"]
            if half == 0:
                return lambda r: k2
            return lambda r: k2 / (1.0 + (r - c) * (r - c)) ** half
        if self.kind == "constant":
            v = p["value"]
            return lambda r: v
        if self.kind == "power_tail":
            k2, a, top = p["kappa"] ** 2, p["alpha"], p["shift"] + p["r0"]
            if a == 0:
                return lambda r: k2
            return lambda r: k2 * (top - r) ** (-a)
        interp = self._interp
        return lambda r: max(float(interp(r)), 0.0)

    def dominated_by(self, other: "CurvatureProfile", r) -> bool:
        """True if ``self <= other`` at every sample of ``r``."""
        return bool(np.all(self.evaluate(r) <= other.evaluate(r)))

    def describe(self) -> dict:
        p = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in self.params.items()}
        return {"kind": self.kind, **p}


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing radial nodes with at least 16 intervals."""

    nodes: np.ndarray
    spacing: str = "uniform"

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 17:
            raise ValueError("a radial grid needs at least 17 nodes (16 intervals)")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if nodes[0] < 0:
            raise ValueError("radial nodes must be nonnegative")
        if self.spacing not in ("uniform", "graded"):
            raise ValueError(f"unknown spacing tag {self.spacing!r}")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, r_max: float, n: int, r_min: float = 0.0) -> "RadialGrid":
        """``n`` equal intervals on ``[r_min, r_max]``."""
        if r_max <= r_min:
            raise ValueError("r_max must exceed r_min")
        return cls(np.linspace(r_min, r_max, int(n) + 1), "uniform")

    @classmethod
    def graded(cls, r_max: float, n: int, ratio: float = 50.0, r_min: float = 0.0) -> "RadialGrid":
        """``n`` intervals growing geometrically; last/first spacing = ``ratio``."""
        if r_max <= r_min:
            raise ValueError("r_max must exceed r_min")
        if ratio <= 0:
            raise ValueError("ratio must be positive")
        xi = np.linspace(0.0, 1.0, int(n) + 1)
        k = np.log(ratio)
        if abs(k) < 1e-12:
            s = xi
        else:
            s = np.expm1(k * xi) / np.expm1(k)
        return cls(r_min + (r_max - r_min) * s, "graded")

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    def __len__(self) -> int:
        return self.nodes.size

    def refined(self) -> "RadialGrid":
        """Grid with every interval bisected (nested refinement)."""
        mid = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        out = np.empty(2 * self.nodes.size - 1)
        out[0::2] = self.nodes
        out[1::2] = mid
        return RadialGrid(out, self.spacing)
