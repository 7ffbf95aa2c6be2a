"""Radial porous-medium and fast-diffusion flows on model manifolds.

``u_t = Lap(u^m)`` with ``u^m = |u|^(m-1) u`` is discretized by cell-centered
finite volumes (exact metric volumes, face areas ``C(d) h^(d-1)``) and
implicit Euler.  Each step is a tridiagonal Newton solve: in ``u`` for
``m >= 1`` and in ``w = u^m`` for ``m < 1``, where ``du/dw`` stays bounded.

The outer boundary is reflecting (zero flux) by default for ``m >= 1`` and
absorbing (``u = 0``) for ``m < 1``; outflow is booked so that
``mass + outflow`` is conserved in both cases.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson, trapezoid
from scipy.linalg import solve_banded

from .cutoff import CutoffProfile, build_cutoff_alpha2, build_cutoff_general, solve_exhaustion
from .geometry import ModelManifold, sphere_area, solve_warping
from .profiles import CurvatureProfile, RadialGrid

__all__ = [
    "RadialMesh",
    "DiffusionProblem",
    "DiffusionState",
    "DiffusionRun",
    "NewtonError",
    "SchemeViolation",
    "BoundaryContact",
    "ContractionReport",
    "MassLedger",
    "MassInequalityReport",
    "ExtinctionReport",
    "critical_exponent",
    "signed_power",
    "step_diffusion",
    "run_diffusion",
    "check_l1_contraction",
    "check_mass_conservation",
    "cutoff_weight_constant",
    "weak_conservation_inequality",
    "extinction_study",
    "strong_solution_monitor",
    "observed_order",
    "ConvergenceStudy",
    "time_convergence",
    "space_convergence",
]

EXTINCTION_FRACTION = 1e-8
SUPPORT_THRESHOLD = 1e-12
BOUNDARY_CELLS = 10


class NewtonError(RuntimeError):
    """Newton failed even after the time step was halved to its floor."""


class SchemeViolation(RuntimeError):
    """A negative cell value below ``-1e-12``."""


class BoundaryContact(RuntimeError):
    """The numerical support came within ``BOUNDARY_CELLS`` of ``r_max``."""


def signed_power(u, m):
    """``|u|^(m-1) u``."""
    u = np.asarray(u, dtype=float)
    return np.sign(u) * np.abs(u) ** m


def critical_exponent(d: int, kappa: float) -> float:
    """``1 - 2 / (1 + (d-1)(1 + sqrt(1 + 4 kappa^2))/2)``; ``(d-2)/d`` at ``kappa = 0``."""
    if kappa == 0:
        # the general expression rounds differently from (d-2)/d
        return (d - 2) / d
    return 1.0 - 2.0 / (1.0 + (d - 1) * (1.0 + math.sqrt(1.0 + 4.0 * kappa * kappa)) / 2.0)


@dataclass(frozen=True, eq=False)
class RadialMesh:
    """Cells ``[faces[i], faces[i+1]]`` with metric volumes and face areas."""

    faces: np.ndarray
    centers: np.ndarray
    volumes: np.ndarray
    areas: np.ndarray
    d: int

    @classmethod
    def build(cls, manifold: ModelManifold, r_max: float, n_cells: int) -> "RadialMesh":
        if n_cells < 8:
            raise ValueError("need at least 8 cells")
        w = manifold.warping
        if w.r_max < r_max * (1 - 1e-12):
            raise ValueError(f"warping grid ends at {w.r_max} < r_max={r_max}")
        d = manifold.d
        faces = np.linspace(0.0, r_max, n_cells + 1)
        centers = 0.5 * (faces[:-1] + faces[1:])
        x, wts = np.polynomial.legendre.leggauss(6)
        half = 0.5 * np.diff(faces)
        pts = centers[:, None] + half[:, None] * x[None, :]
        h, _ = w.evaluate(pts.ravel())
        dens = h.reshape(pts.shape) ** (d - 1)
        volumes = sphere_area(d) * half * (dens @ wts)
        hf, _ = w.evaluate(faces)
        areas = sphere_area(d) * hf ** (d - 1)
        return cls(faces, centers, volumes, areas, d)

    @property
    def n(self) -> int:
        return self.centers.size

    @property
    def r_max(self) -> float:
        return float(self.faces[-1])

    def integrate(self, values) -> float:
        return float(np.dot(self.volumes, values))

    def ball_integral(self, values, R: float) -> float:
        """``int_{B_R} values dV`` with the cell cut by ``R`` taken proportionally."""
        frac = np.clip((R - self.faces[:-1]) / np.diff(self.faces), 0.0, 1.0)
        return float(np.dot(self.volumes * frac, values))

    def coarsen(self, values) -> np.ndarray:
        """Volume-weighted average onto the mesh with half as many cells."""
        v = self.volumes
        return (v[0::2] * values[0::2] + v[1::2] * values[1::2]) / (v[0::2] + v[1::2])


@dataclass(frozen=True, eq=False)
class DiffusionProblem:
    """``u_t = Lap(u^m)`` on a model manifold, truncated at ``r_max``."""

    m: float
    manifold: ModelManifold
    u0: Callable
    horizon: float
    r_max: float
    n_cells: int = 400
    boundary: str | None = None
    kappa: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"m must be positive, got {self.m}")
        if self.boundary not in (None, "reflecting", "absorbing"):
            raise ValueError("boundary must be 'reflecting' or 'absorbing'")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")

    @classmethod
    def on_model(cls, m, d, kappa, alpha, u0, horizon, r_max, n_cells=400, boundary=None):
        profile = CurvatureProfile.standard(kappa, alpha)
        w = solve_warping(profile, RadialGrid.uniform(r_max, max(64, int(math.ceil(8 * r_max)))))
        return cls(m, ModelManifold(w, d), u0, horizon, r_max, n_cells, boundary, kappa, alpha)

    @property
    def d(self) -> int:
        return self.manifold.d

    @property
    def absorbing(self) -> bool:
        if self.boundary is None:
            return self.m < 1
        return self.boundary == "absorbing"

    def mesh(self, n_cells: int | None = None) -> RadialMesh:
        return RadialMesh.build(self.manifold, self.r_max, n_cells or self.n_cells)

    def initial_state(self, mesh: RadialMesh | None = None) -> "DiffusionState":
        mesh = mesh or self.mesh()
        u = np.asarray(self.u0(mesh.centers), dtype=float) * np.ones(mesh.n)
        if np.any(u < 0):
            raise ValueError("initial data must be nonnegative")
        return DiffusionState(0.0, u, mesh.integrate(u), 0.0, mesh)

    def manifest(self, dt: float) -> dict:
        return {
            "m": self.m, "d": self.d, "kappa": self.kappa, "alpha": self.alpha,
            "grid": {"r_max": self.r_max, "n_cells": self.n_cells},
            "dt": dt, "horizon": self.horizon,
            "boundary": "absorbing" if self.absorbing else "reflecting",
        }


@dataclass(frozen=True, eq=False)
class DiffusionState:
    t: float
    u: np.ndarray
    mass: float
    outflow: float
    mesh: RadialMesh

    @property
    def sup(self) -> float:
        return float(np.max(np.abs(self.u)))

    def support_radius(self, threshold: float = SUPPORT_THRESHOLD) -> float:
        idx = np.nonzero(np.abs(self.u) > threshold)[0]
        return float(self.mesh.faces[idx[-1] + 1]) if idx.size else 0.0

    def support_cells_from_boundary(self, threshold: float = SUPPORT_THRESHOLD) -> int:
        idx = np.nonzero(np.abs(self.u) > threshold)[0]
        return int(self.mesh.n - 1 - idx[-1]) if idx.size else self.mesh.n


def _flux_coefficients(mesh: RadialMesh, absorbing: bool):
    """Conductances ``A / dr`` at interior faces and at the outer face."""
    inner = mesh.areas[1:-1] / np.diff(mesh.centers)
    outer = mesh.areas[-1] / (mesh.r_max - mesh.centers[-1]) if absorbing else 0.0
    return inner, outer


def _apply_laplacian(w, cond, outer):
    """``sum of fluxes`` per cell for nodal ``w`` (outer face at ``w = 0``)."""
    flux = cond * np.diff(w)
    div = np.zeros_like(w)
    div[:-1] += flux
    div[1:] -= flux
    div[-1] -= outer * w[-1]
    return div


def _newton_step(u_old, mesh, m, dt, absorbing, tol, max_iter):
    """One implicit Euler step; returns the new ``u`` or ``None`` on failure."""
    cond, outer = _flux_coefficients(mesh, absorbing)
    V = mesh.volumes
    mass_scale = max(float(np.dot(V, np.abs(u_old))), 1e-300)
    in_w = m < 1
    x = signed_power(u_old, m) if in_w else u_old.copy()
    for _ in range(max_iter):
        if in_w:
            u = signed_power(x, 1.0 / m)
            dudx = np.abs(x) ** (1.0 / m - 1.0) / m
            w, dwdx = x, np.ones_like(x)
        else:
            u = x
            dudx = np.ones_like(x)
            w = signed_power(x, m)
            dwdx = m * np.abs(x) ** (m - 1.0) if m != 1 else np.ones_like(x)
        F = V * (u - u_old) / dt - _apply_laplacian(w, cond, outer)
        # residual relative to the mass scale, with a floor at the rounding
        # level of the flux terms (these dominate near extinction when m < 1)
        res = float(np.sum(np.abs(F))) * dt / mass_scale
        flux_scale = float(np.sum(cond * (np.abs(w[:-1]) + np.abs(w[1:])))) + outer * abs(w[-1])
        if res <= tol or float(np.sum(np.abs(F))) <= 64 * np.finfo(float).eps * flux_scale:
            return u
        diag = V * dudx / dt
        diag[:-1] += cond * dwdx[:-1]
        diag[1:] += cond * dwdx[1:]
        diag[-1] += outer * dwdx[-1]
        ab = np.zeros((3, x.size))
        ab[0, 1:] = -cond * dwdx[1:]
        ab[1] = diag
        ab[2, :-1] = -cond * dwdx[:-1]
        try:
            dx = solve_banded((1, 1), ab, -F)
        except (np.linalg.LinAlgError, ValueError):
            return None
        if not np.all(np.isfinite(dx)):
            return None
        # damping: halve until the residual does not grow by more than 10x
        lam = 1.0
        for _ in range(30):
            trial = x + lam * dx
            tu = signed_power(trial, 1.0 / m) if in_w else trial
            tw = trial if in_w else signed_power(trial, m)
            tF = V * (tu - u_old) / dt - _apply_laplacian(tw, cond, outer)
            if np.sum(np.abs(tF)) <= max(np.sum(np.abs(F)), 1e-300) * (1.0 + 1e-12) or lam < 1e-3:
                break
            lam *= 0.5
        x = trial
    return None


def step_diffusion(
    state: DiffusionState,
    problem: DiffusionProblem,
    dt: float,
    *,
    tol: float = 1e-13,
    max_iter: int = 60,
    min_dt_fraction: float = 1.0 / 1024,
) -> DiffusionState:
    """Advance by ``dt`` (in sub-steps if Newton needs a smaller step)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    mesh = state.mesh
    u = state.u
    t = state.t
    remaining = dt
    h = dt
    outflow = state.outflow
    while remaining > 1e-15 * dt:
        h = min(h, remaining)
        new = _newton_step(u, mesh, problem.m, h, problem.absorbing, tol, max_iter)
        if new is None:
            h *= 0.5
            if h < dt * min_dt_fraction:
                raise NewtonError(f"Newton did not converge with dt down to {h:.3g} at t={t:.6g}")
            continue
        if np.min(new) < -1e-12:
            raise SchemeViolation(f"negative cell value {np.min(new):.3g} at t={t + h:.6g}")
        if problem.absorbing:
            _, outer = _flux_coefficients(mesh, True)
            outflow += h * outer * float(signed_power(new[-1], problem.m))
        u = new
        t += h
        remaining -= h
    return DiffusionState(state.t + dt, u, mesh.integrate(u), outflow, mesh)


@dataclass(frozen=True, eq=False)
class DiffusionRun:
    problem: DiffusionProblem
    dt: float
    states: tuple
    boundary_ok: bool

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def masses(self) -> np.ndarray:
        return np.array([s.mass for s in self.states])

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["t", "mass", "sup_u", "support_radius"])
        for s in self.states:
            wr.writerow([repr(s.t), repr(s.mass), repr(s.sup), repr(s.support_radius())])
        return buf.getvalue()

    def manifest_json(self) -> str:
        return json.dumps(self.problem.manifest(self.dt), indent=2)


def run_diffusion(
    problem: DiffusionProblem,
    dt: float,
    *,
    mesh: RadialMesh | None = None,
    u0=None,
    record_every: int = 1,
    stop_below: float | None = None,
    strict_boundary: bool = False,
) -> DiffusionRun:
    """Integrate to the horizon with a fixed step, recording every few steps.

    ``stop_below`` ends the run once the mass falls below that fraction of the
    initial mass.  With a reflecting boundary the support is monitored; when
    it gets within ``BOUNDARY_CELLS`` cells of ``r_max`` the run is flagged
    (or, with ``strict_boundary``, aborted).
    """
    mesh = mesh or problem.mesh()
    state = problem.initial_state(mesh)
    if u0 is not None:
        u = np.asarray(u0, dtype=float)
        state = DiffusionState(0.0, u, mesh.integrate(u), 0.0, mesh)
    n_steps = int(round(problem.horizon / dt))
    if abs(n_steps * dt - problem.horizon) > 1e-9 * problem.horizon:
        raise ValueError("horizon must be a multiple of dt")
    states = [state]
    ok = True
    m0 = state.mass
    for k in range(1, n_steps + 1):
        state = step_diffusion(state, problem, dt)
        state = DiffusionState(k * dt, state.u, state.mass, state.outflow, mesh)
        if not problem.absorbing and state.support_cells_from_boundary() < BOUNDARY_CELLS:
            ok = False
            if strict_boundary:
                raise BoundaryContact(f"support reached the outer boundary at t={state.t:.6g}")
        if k % record_every == 0 or k == n_steps:
            states.append(state)
        if stop_below is not None and state.mass < stop_below * m0:
            if states[-1] is not state:
                states.append(state)
            break
    return DiffusionRun(problem, dt, tuple(states), ok)


# -- contraction and mass ----------------------------------------------------
@dataclass(frozen=True)
class ContractionReport:
    times: tuple
    distances: tuple
    ordered: bool
    tolerance: float
    max_increase: float

    @property
    def ok(self) -> bool:
        return self.max_increase <= self.tolerance


def check_l1_contraction(problem: DiffusionProblem, u0, v0, dt: float, *, record_every: int = 1) -> ContractionReport:
    """Run both data on the same mesh and step; ``||u - v||_1`` must not grow."""
    mesh = problem.mesh()
    ua = np.asarray(u0(mesh.centers) if callable(u0) else u0, dtype=float)
    va = np.asarray(v0(mesh.centers) if callable(v0) else v0, dtype=float)
    ru = run_diffusion(problem, dt, mesh=mesh, u0=ua, record_every=record_every)
    rv = run_diffusion(problem, dt, mesh=mesh, u0=va, record_every=record_every)
    dist = np.array([mesh.integrate(np.abs(a.u - b.u)) for a, b in zip(ru.states, rv.states)])
    ordered_start = np.all(ua >= va) or np.all(ua <= va)
    sign = 1.0 if np.all(ua >= va) else -1.0
    ordered = bool(ordered_start and all(np.all(sign * (a.u - b.u) >= -1e-12) for a, b in zip(ru.states, rv.states)))
    scale = dist[0] + mesh.integrate(ua) + mesh.integrate(va)
    tol = 1e-8 * scale
    inc = float(np.max(np.diff(dist))) if dist.size > 1 else 0.0
    return ContractionReport(tuple(ru.times), tuple(dist), ordered, tol, max(inc, 0.0))


@dataclass(frozen=True)
class MassLedger:
    times: tuple
    masses: tuple
    outflow: tuple
    max_relative_drift: float
    valid: bool

    @property
    def ok(self) -> bool:
        return self.valid and self.max_relative_drift <= 1e-8


def check_mass_conservation(problem: DiffusionProblem, dt: float, *, record_every: int = 1) -> MassLedger:
    """Relative mass drift over the run; invalid if the support hit ``r_max``."""
    if not problem.m > 1:
        raise ValueError("mass conservation is checked for m > 1")
    run = run_diffusion(problem, dt, record_every=record_every)
    masses = run.masses
    drift = float(np.max(np.abs(masses - masses[0])) / masses[0])
    return MassLedger(tuple(run.times), tuple(masses), tuple(s.outflow for s in run.states), drift, run.boundary_ok)


# -- weak conservation for fast diffusion -------------------------------------
def _cutoff(kappa, alpha, d, R, gamma, exh=None) -> CutoffProfile:
    if alpha == 2.0:
        return build_cutoff_alpha2(kappa, d, R, gamma)[1]
    if exh is None:
        exh = solve_exhaustion(alpha, kappa, d, r_valid=max(16.0, 2.0 * gamma * R))
    return build_cutoff_general(alpha, kappa, d, R, gamma, exh)


def cutoff_weight_constant(cut: CutoffProfile, m: float, d: int, manifold: ModelManifold, b: int | None = None):
    """``C(psi) = [2 int |Lap psi|^(1/(1-m)) psi^(-m/(1-m)) dV]^(1-m)`` for ``psi = phi^b``.

    The integrand is rewritten as
    ``phi^((b-2-bm)/(1-m)) |b phi Lap(phi) + b(b-1) |phi'|^2|^(1/(1-m))`` so
    that no negative power is formed.  Returns ``(C, b)``.
    """
    if not 0 < m < 1:
        raise ValueError("C(psi) is defined for 0 < m < 1")
    if b is None:
        b = math.ceil(2.0 / (1.0 - m)) + 1
    expo = (b - 2.0 - b * m) / (1.0 - m)
    if not expo > 0:
        raise ValueError(f"b={b} too small: exponent {(expo):.3g} must be positive")
    p = 1.0 / (1.0 - m)
    r = cut.r
    core = np.abs(b * cut.phi * cut.lap_phi + b * (b - 1.0) * cut.dphi**2) ** p
    integrand = np.where(cut.phi > 0, cut.phi ** expo, 0.0) * core
    h, _ = manifold.warping.evaluate(r)
    dens = sphere_area(d) * h ** (d - 1)
    val = simpson(integrand * dens, x=r)
    if not (np.isfinite(val) and val >= 0):
        raise ValueError(f"C(psi) quadrature failed: {val}")
    return float((2.0 * val) ** (1.0 - m)), b


@dataclass(frozen=True)
class MassInequalityReport:
    R: float
    gamma: float
    t1: float
    t2: float
    lhs: float
    rhs: float
    M: float
    C_psi: float
    b: int
    C_fit: float
    annulus_volume: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"margin": self.margin}


def _annulus_volume(manifold: ModelManifold, R, gamma):
    from .geometry import volume_ball

    return volume_ball(manifold.warping, manifold.d, gamma * R) - volume_ball(manifold.warping, manifold.d, R)


def weak_conservation_inequality(
    problem: DiffusionProblem,
    run_u: DiffusionRun,
    run_v: DiffusionRun | None,
    R: float,
    gamma: float,
    t1: float,
    t2: float,
    *,
    cut: CutoffProfile | None = None,
) -> MassInequalityReport:
    """``[int_{B_R} g(t2)]^(1-m) <= [int_{B_gammaR} g(t1)]^(1-m) + M (t2 - t1)``
    with ``g = |u - v|`` and ``M = C(psi)``.

    The fitted constant ``C_fit = M R^(1+alpha/2) / Vol(annulus)^(1-m)`` is
    reported alongside.
    """
    m = problem.m
    if not 0 < m < 1:
        raise ValueError("weak conservation is stated for 0 < m < 1")
    if not t2 >= t1 >= 0:
        raise ValueError("need 0 <= t1 <= t2")
    if gamma * R > problem.r_max:
        raise ValueError("gamma R exceeds the computational domain")
    cut = cut or _cutoff(problem.kappa, problem.alpha, problem.d, R, gamma)
    C_psi, b = cutoff_weight_constant(cut, m, problem.d, problem.manifold)
    vol = _annulus_volume(problem.manifold, R, gamma)
    M = C_psi
    C_fit = M * R ** (1.0 + problem.alpha / 2.0) / vol ** (1.0 - m)

    def g_at(t):
        su = _state_at(run_u, t)
        sv = None if run_v is None else _state_at(run_v, t)
        return np.abs(su.u - (0.0 if sv is None else sv.u)), su.mesh

    g2, mesh = g_at(t2)
    g1, _ = g_at(t1)
    lhs = mesh.ball_integral(g2, R) ** (1.0 - m)
    rhs = mesh.ball_integral(g1, gamma * R) ** (1.0 - m) + M * (t2 - t1)
    return MassInequalityReport(R, gamma, t1, t2, lhs, rhs, M, C_psi, b, C_fit, vol)


def _state_at(run: DiffusionRun, t: float) -> DiffusionState:
    times = run.times
    k = int(np.argmin(np.abs(times - t)))
    if abs(times[k] - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} was not recorded in the run")
    return run.states[k]


@dataclass(frozen=True)
class ExtinctionReport:
    m: float
    m_c: float
    extinction_time: float | None
    censored: bool
    lower_bound: float
    bound_radius: float
    final_mass_fraction: float

    @property
    def consistent(self) -> bool:
        return self.extinction_time is None or self.extinction_time >= self.lower_bound * (1 - 1e-9)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__} | {"consistent": self.consistent}


def extinction_lower_bound(problem: DiffusionProblem, u0_cells, mesh: RadialMesh, radii, gamma: float):
    """``max_R (int_{B_R} u0)^(1-m) / M_R``; returns ``(bound, argmax R)``."""
    best = (0.0, float(radii[0]))
    for R in radii:
        if gamma * R > problem.r_max:
            continue
        cut = _cutoff(problem.kappa, problem.alpha, problem.d, R, gamma)
        M, _ = cutoff_weight_constant(cut, problem.m, problem.d, problem.manifold)
        val = mesh.ball_integral(u0_cells, R) ** (1.0 - problem.m) / M
        if val > best[0]:
            best = (float(val), float(R))
    return best


def extinction_study(
    d: int,
    kappa: float,
    alpha: float,
    m_values,
    u0: Callable,
    horizon: float,
    *,
    dt: float,
    r_max: float = 12.0,
    n_cells: int = 240,
    gamma: float = 1.5,
    radii=(1.0, 2.0, 4.0),
):
    """Measure extinction (mass below ``1e-8`` of the initial mass) per ``m``."""
    reports = []
    m_c = critical_exponent(d, kappa)
    for m in m_values:
        if not 0 < m < 1:
            raise ValueError("extinction is studied for 0 < m < 1")
        prob = DiffusionProblem.on_model(m, d, kappa, alpha, u0, horizon, r_max, n_cells, "absorbing")
        mesh = prob.mesh()
        run = run_diffusion(prob, dt, mesh=mesh, stop_below=EXTINCTION_FRACTION)
        masses = run.masses
        hit = np.nonzero(masses < EXTINCTION_FRACTION * masses[0])[0]
        t_ext = float(run.times[hit[0]]) if hit.size else None
        lb, R_best = extinction_lower_bound(prob, run.states[0].u, mesh, radii, gamma)
        reports.append(
            ExtinctionReport(m, m_c, t_ext, t_ext is None, lb, R_best, float(masses[-1] / masses[0]))
        )
    return reports


def strong_solution_monitor(run: DiffusionRun, n_values, gamma: float) -> dict:
    """``int_0^T int_{n <= r <= gamma n} |u^m| dV dt / n^(1+alpha/2)`` per ``n``."""
    p = run.problem
    out = {}
    times = run.times
    for n in n_values:
        vals = []
        for s in run.states:
            w = np.abs(signed_power(s.u, p.m))
            vals.append(s.mesh.ball_integral(w, gamma * n) - s.mesh.ball_integral(w, n))
        total = float(trapezoid(vals, times)) if len(vals) > 1 else 0.0
        out[float(n)] = total / n ** (1.0 + p.alpha / 2.0)
    return out


def observed_order(coarse_change: float, fine_change: float) -> float:
    """``log2`` of the ratio of successive refinement differences."""
    return math.log2(coarse_change / fine_change)


@dataclass(frozen=True)
class ConvergenceStudy:
    """Successive-difference orders from a three-level ladder."""

    kind: str
    levels: tuple
    changes: tuple
    order: float

    def to_dict(self) -> dict:
        return {"kind": self.kind, "levels": list(self.levels), "changes": list(self.changes), "order": self.order}


def _final_state(problem: DiffusionProblem, dt: float, n_cells: int) -> tuple[np.ndarray, RadialMesh]:
    mesh = problem.mesh(n_cells)
    run = run_diffusion(problem, dt, mesh=mesh, record_every=10**9)
    return run.states[-1].u, mesh


def time_convergence(problem: DiffusionProblem, dt: float) -> ConvergenceStudy:
    """Fixed mesh, steps ``dt, dt/2, dt/4``; L1 differences of the final states."""
    mesh = problem.mesh()
    sols = [_final_state(problem, dt / 2**k, problem.n_cells)[0] for k in range(3)]
    changes = (mesh.integrate(np.abs(sols[0] - sols[1])), mesh.integrate(np.abs(sols[1] - sols[2])))
    return ConvergenceStudy("time", (dt, dt / 2, dt / 4), changes, observed_order(*changes))


def space_convergence(problem: DiffusionProblem, dt: float) -> ConvergenceStudy:
    """Fixed step, ``n, 2n, 4n`` cells; finer solutions are volume-averaged down."""
    n = problem.n_cells
    coarse, m0 = _final_state(problem, dt, n)
    mid, m1 = _final_state(problem, dt, 2 * n)
    fine, m2 = _final_state(problem, dt, 4 * n)
    fine_on_mid = m2.coarsen(fine)
    changes = (
        m0.integrate(np.abs(coarse - m1.coarsen(mid))),
        m1.integrate(np.abs(mid - fine_on_mid)),
    )
    return ConvergenceStudy("space", (n, 2 * n, 4 * n), changes, observed_order(*changes))
