"""Verification checks run by ``verify-all`` and by the acceptance tests.

Each check returns a :class:`CheckResult` whose ``metrics`` hold the raw
measurements; ``passed`` applies the tolerances in :data:`DEFAULT_TOLERANCES`
(overridable per run).  ``margin`` is the smallest normalized slack, so a
negative margin says how badly the worst sub-check missed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as gamma_fn

from .comparison import closed_form_psi, numeric_psi, sturm_compare, sturm_pair
from .cutoff import _Solver, build_cutoff_alpha2, build_cutoff_general, solve_exhaustion
from .diffusion import (
    DiffusionProblem,
    check_l1_contraction,
    check_mass_conservation,
    critical_exponent,
    extinction_study,
    run_diffusion,
    space_convergence,
    time_convergence,
    weak_conservation_inequality,
)
from .geometry import bishop_gromov_ratio_check, solve_warping, volume_ball
from .gradient import PoissonProblem, compute_bounds, solve_radial_poisson, verify_gradient_estimate
from .profiles import CurvatureProfile, RadialGrid

__all__ = [
    "CheckResult",
    "DEFAULT_TOLERANCES",
    "CHECKS",
    "PRESETS",
    "run_check",
    "order_meets",
    "SubChecks",
    "cutoff_sweep",
    "cutoff_sweep_slacks",
]

DEFAULT_TOLERANCES = {
    "warp_flat": 1e-10,
    "warp_sinh": 1e-8,
    "sturm": 1e-8,
    "power": 1e-8,
    "bessel": 1e-6,
    "spread": 4.0,
    "decay": 8.0,
    "sandwich": 1e-9,
    "theta": 1e-10,
    "mass": 1e-8,
    "identical": 1e-10,
    "contraction": 1e-8,
    "remaining": 0.5,
}


def order_meets(observed: float, nominal: float) -> bool:
    """Observed orders approach the nominal one from either side; compare at one decimal."""
    return round(observed, 1) >= nominal


@dataclass(frozen=True)
class CheckResult:
    key: str
    criterion: int | None
    title: str
    reference: str
    passed: bool
    margin: float
    detail: str
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0

    def to_dict(self) -> dict:
        # run time is reported separately so that reports stay reproducible
        return {
            "key": self.key,
            "criterion": self.criterion,
            "title": self.title,
            "reference": self.reference,
            "passed": self.passed,
            "margin": _clean(self.margin),
            "detail": self.detail,
            "metrics": _clean(self.metrics),
        }


def _clean(x):
    """JSON-safe copy: numpy scalars to floats, non-finite values to strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


class SubChecks:
    """Collects named sub-checks: numeric slacks (>= 0 passes) and yes/no flags."""

    def __init__(self):
        self.items: list[tuple[str, float]] = []
        self.flags: list[tuple[str, bool]] = []
        self.metrics: dict = {}

    def add(self, name: str, slack: float):
        self.items.append((name, float(slack)))

    def flag(self, name: str, ok):
        self.flags.append((name, bool(ok)))

    def result(self, key, criterion, title, reference, started) -> CheckResult:
        worst = min(self.items, key=lambda kv: kv[1]) if self.items else ("none", 0.0)
        failing = [n for n, ok in self.flags if not ok] + [n for n, s in self.items if s < 0]
        passed = not failing
        if not passed and worst[1] >= 0:
            worst = (failing[0], -math.inf)
        detail = "all sub-checks pass" if passed else f"{len(failing)} failing, first: {failing[0]}"
        return CheckResult(
            key, criterion, title, reference, passed, worst[1], detail, self.metrics,
            time.perf_counter() - started,
        )


def _rel_excess(value, bound):
    """``(bound - value) / max(1, |bound|)``, a slack in relative units."""
    return (bound - value) / max(1.0, abs(bound))


# -- 1 ------------------------------------------------------------------------
def check_warping(tol, seed, flat_only=False) -> CheckResult:
    t0 = time.perf_counter()
    led = SubChecks()
    grid = RadialGrid.uniform(10.0, 1000)
    w0 = solve_warping(CurvatureProfile.constant(0.0), grid)
    err_lin = float(np.max(np.abs(w0.h - grid.nodes) / np.maximum(1.0, grid.nodes)))
    led.add("flat warping h = r", tol["warp_flat"] - err_lin)
    led.metrics["flat_h_error"] = err_lin
    for d in (2, 3, 4):
        exact = math.pi ** (d / 2) / gamma_fn(d / 2 + 1)
        rel = abs(volume_ball(w0, d, 1.0) / exact - 1.0)
        led.metrics[f"unit_ball_rel_error_d{d}"] = rel
        led.add(f"unit ball volume d={d}", tol["warp_flat"] - rel)
    if not flat_only:
        w1 = solve_warping(CurvatureProfile.constant(1.0), grid)
        err = float(np.max(np.abs(w1.h - np.sinh(grid.nodes)) / np.maximum(1.0, np.sinh(grid.nodes))))
        led.metrics["sinh_rel_error"] = err
        led.add("unit curvature h = sinh", tol["warp_sinh"] - err)
    return led.result(
        "warping", 1, "Warping exactness", "h'' = G h, h(0) = 0, h'(0) = 1; V_G(1) = unit-ball volume", t0
    )


# -- 2 ------------------------------------------------------------------------
def _random_ordered_pair(rng, flat_low=False):
    a_low = float(rng.uniform(-2.0, 2.0))
    a_high = float(rng.uniform(-2.0, a_low))
    k_high = float(rng.uniform(0.2, 1.5))
    k_low = 0.0 if flat_low else float(rng.uniform(0.0, k_high))
    return CurvatureProfile.standard(k_low, a_low), CurvatureProfile.standard(k_high, a_high)


def check_sturm(tol, seed, flat_only=False, n_pairs=20) -> CheckResult:
    t0 = time.perf_counter()
    led = SubChecks()
    rng = np.random.default_rng(seed)
    grid = RadialGrid.uniform(4.0, 800)
    radii = np.linspace(0.25, 4.0, 16)
    worst_v = worst_l = worst_bg = -math.inf
    for i in range(n_pairs):
        low, high = _random_ordered_pair(rng, flat_only)
        d = (2, 3, 5)[i % 3]
        rep = sturm_compare(sturm_pair(low, high, grid), tol["sturm"])
        bg = bishop_gromov_ratio_check(low, high, d, radii, grid=grid, tol=tol["sturm"])
        worst_v = max(worst_v, rep.max_value_excess)
        worst_l = max(worst_l, rep.max_log_derivative_excess)
        worst_bg = max(worst_bg, bg.max_increase)
        led.flag(f"pair {i} coefficients ordered", rep.coefficients_ordered and bg.precondition_ok)
        led.add(f"pair {i} h ordering", tol["sturm"] - rep.max_value_excess)
        led.add(f"pair {i} log-derivative ordering", tol["sturm"] - rep.max_log_derivative_excess)
        led.add(f"pair {i} volume ratio monotone (d={d})", tol["sturm"] - bg.max_increase)
    led.metrics.update(
        pairs=n_pairs, max_h_excess=worst_v, max_log_derivative_excess=worst_l, max_ratio_increase=worst_bg
    )
    return led.result(
        "sturm", 2, "Sturm and Bishop-Gromov comparison",
        "G1 <= G2 implies h1 <= h2, h1'/h1 <= h2'/h2, and V1(R)/V2(R) nonincreasing", t0,
    )


# -- 3 ------------------------------------------------------------------------
def check_closed_forms(tol, seed, flat_only=False) -> CheckResult:
    t0 = time.perf_counter()
    led = SubChecks()
    worst = {"power": 0.0, "bessel": 0.0, "barrier_deficit": 0.0}
    for kappa in (0.5, 1.0, 2.0):
        for r in (2.0, 10.0):
            s = np.linspace(0.0, 0.9 * r, 901)
            for alpha in (2.0, 0.5, 1.0, 1.5, -1.0):
                cf = closed_form_psi(kappa, alpha, r)
                num = numeric_psi(kappa, alpha, r, s).h
                ref = cf(s)
                scale = np.maximum(1.0, np.abs(num))
                if alpha == -1.0:
                    # barrier must lie above the solution at every node
                    deficit = float(np.max((num - ref) / scale))
                    worst["barrier_deficit"] = max(worst["barrier_deficit"], deficit)
                    led.add(f"barrier dominates (kappa={kappa}, r={r})", -deficit if deficit > 0 else 0.0)
                    continue
                err = float(np.max(np.abs(ref - num) / scale))
                kind = "power" if alpha == 2.0 else "bessel"
                worst[kind] = max(worst[kind], err)
                led.add(f"{kind} form alpha={alpha} kappa={kappa} r={r}", tol[kind] - err)
    for kappa in (0.5, 1.0, 2.0):
        for r in (2.0, 10.0, 100.0):
            cf = closed_form_psi(kappa, 2.0, r)
            led.add(f"endpoint bound kappa={kappa} r={r}", _rel_excess(float(cf(r - 1.0)), cf.endpoint_bound()))
    led.metrics.update(
        max_power_error=worst["power"], max_bessel_error=worst["bessel"],
        max_barrier_deficit=worst["barrier_deficit"],
    )
    return led.result(
        "closed_forms", 3, "Comparison ODE closed forms",
        "psi'' = kappa^2 (r-s)^(-alpha) psi: power, Bessel and hyperbolic-barrier forms; psi(r-1) bound", t0,
    )


# -- 4 ------------------------------------------------------------------------
def cutoff_sweep(alpha, kappa, d, gamma, radii, exh=None):
    if alpha == 2.0:
        return [build_cutoff_alpha2(kappa, d, R, gamma)[1] for R in radii]
    exh = exh or solve_exhaustion(alpha, kappa, d, r_valid=max(64.0, 4.0 * gamma * max(radii)))
    return [build_cutoff_general(alpha, kappa, d, R, gamma, exh) for R in radii]


def cutoff_sweep_slacks(led: SubChecks, label, cuts, tol, *, spread=True, decay=True):
    c1 = np.array([c.C1 for c in cuts])
    c2 = np.array([c.C2 for c in cuts])
    props = all(c.in_unit_interval() and c.plateau_ok() and c.support_ok() for c in cuts)
    led.flag(f"{label} unit interval, plateau and support", props)
    spread1, spread2 = c1.max() / c1.min(), c2.max() / c2.min()
    if spread:
        led.add(f"{label} gradient constant spread", (tol["spread"] - spread1) / tol["spread"])
        led.add(f"{label} Laplacian constant spread", (tol["spread"] - spread2) / tol["spread"])
    g_ratio = cuts[-1].sup_grad / cuts[0].sup_grad
    l_ratio = cuts[-1].sup_lap / cuts[0].sup_lap
    if decay:
        led.add(f"{label} gradient decay", 1.0 / tol["decay"] - g_ratio)
        led.add(f"{label} Laplacian decay", 1.0 / tol["decay"] - l_ratio)
    led.metrics[label] = {
        "C1_spread": spread1, "C2_spread": spread2, "grad_ratio": g_ratio, "lap_ratio": l_ratio,
        "properties": props,
    }


def check_cutoffs(tol, seed, flat_only=False) -> CheckResult:
    t0 = time.perf_counter()
    led = SubChecks()
    cases = [(2.0, 0.0, 3, 1.5)] if flat_only else [(0.0, 1.0, 3, 3.0), (1.0, 1.0, 3, 3.0), (2.0, 1.0, 3, 1.5)]
    radii = list(range(1, 17))
    for alpha, kappa, d, gamma in cases:
        label = f"alpha={alpha:g},kappa={kappa:g},d={d},gamma={gamma:g}"
        cutoff_sweep_slacks(led, label, cutoff_sweep(alpha, kappa, d, gamma, radii), tol)
    return led.result(
        "cutoffs", 4, "Laplacian cut-off certification",
        "0 <= phi_R <= 1, phi_R = 1 on B_R, supp in B_(gamma R), |grad phi_R| <= C1/R, |Lap phi_R| <= C2/R^(1+alpha/2)",
        t0,
    )


# -- 5 ------------------------------------------------------------------------
def check_sharp_gamma(tol, seed, flat_only=False) -> CheckResult:
    t0 = time.perf_counter()
    led = SubChecks()
    kappa = 0.0 if flat_only else 1.0
    for gamma in (1.1, 1.05):
        thetas = []
        for R in (1.0, 100.0):
            ann, cut = build_cutoff_alpha2(kappa, 3, R, gamma)
            led.add(f"sandwich gamma={gamma} R={R:g}", ann.sandwich_slack + tol["sandwich"])
            led.flag(f"maximum principle gamma={gamma} R={R:g}", ann.maximum_principle_ok())
            props = cut.in_unit_interval() and cut.plateau_ok() and cut.support_ok()
            led.flag(f"cut-off properties gamma={gamma} R={R:g}", props)
            led.metrics[f"gamma={gamma},R={R:g}"] = {"theta": ann.theta, "sandwich_slack": ann.sandwich_slack}
            thetas.append(ann.theta)
        led.add(f"theta scale-free gamma={gamma}", tol["theta"] - abs(thetas[0] - thetas[1]))
    return led.result(
        "sharp_gamma", 5, "Annulus barrier for gamma close to 1",
        "u <= omega <= 1 - v on the annulus; theta independent of R", t0,
    )


# -- 6 ------------------------------------------------------------------------
def check_li_yau(tol, seed, flat_only=False) -> CheckResult:
    t0 = time.perf_counter()
    led = SubChecks()
    kappa = 0.0 if flat_only else 1.0
    for alpha in (0.0, 1.0, 2.0):
        prof = CurvatureProfile.standard(kappa, alpha)
        scaled = []
        for R1 in (2.0, 4.0, 8.0, 16.0):
            p = PoissonProblem.linear_reaction(alpha, R1, 2.0, 0.25)
            sol = solve_radial_poisson(p, prof, 3)
            rep = verify_gradient_estimate(p, sol, compute_bounds(p, sol, 3, prof))
            led.add(f"bound alpha={alpha:g} R1={R1:g}", rep.margin_min / max(rep.B, 1e-300))
            scaled.append(rep.sup_lhs * R1**alpha)
        spread = max(scaled) / min(scaled)
        led.add(f"scaling alpha={alpha:g}", (tol["spread"] - spread) / tol["spread"])
        led.metrics[f"alpha={alpha:g}"] = {"scaled_sup": scaled, "spread": spread}
    return led.result(
        "li_yau", 6, "Li-Yau gradient bound",
        "(w'/w)^2 <= B on B_(R1) for Lap w = f1 f2(w), with the R1^(-alpha) scaling", t0,
    )


# -- 7 ------------------------------------------------------------------------
def _bump(amplitude, center, width):
    return lambda r: amplitude * np.maximum(0.0, 1.0 - ((r - center) / width) ** 2) ** 2


def _random_bump(rng):
    return _bump(float(rng.uniform(0.2, 2.0)), float(rng.uniform(0.0, 2.0)), float(rng.uniform(0.5, 1.5)))


def check_pme(tol, seed, flat_only=False, n_pairs=10) -> CheckResult:
    t0 = time.perf_counter()
    led = SubChecks()
    rng = np.random.default_rng(seed)
    manifolds = [(0.0, 0.0)] if flat_only else [(0.0, 0.0), (1.0, 2.0)]
    for m in (1.5, 2.0):
        for kappa, alpha in manifolds:
            label = f"m={m:g},kappa={kappa:g},alpha={alpha:g}"
            p = DiffusionProblem.on_model(m, 3, kappa, alpha, _bump(1.0, 0.0, 1.0), 1.0, 6.0, 300)
            ledger = check_mass_conservation(p, 0.01)
            led.flag(f"{label} support interior", ledger.valid)
            led.add(f"{label} mass drift", (tol["mass"] - ledger.max_relative_drift) / tol["mass"])
            q = DiffusionProblem.on_model(m, 3, kappa, alpha, _bump(1.0, 0.0, 1.0), 0.5, 8.0, 160)
            worst = 0.0
            for i in range(n_pairs):
                rep = check_l1_contraction(q, _random_bump(rng), _random_bump(rng), 0.01)
                # rep.tolerance is 1e-8 times the distance-plus-mass scale
                allowed = tol["contraction"] * rep.tolerance / 1e-8
                worst = max(worst, rep.max_increase / allowed)
                led.add(f"{label} contraction pair {i}", 1.0 - rep.max_increase / allowed)
            same = _random_bump(rng)
            rep = check_l1_contraction(q, same, same, 0.01)
            mass = q.mesh().integrate(same(q.mesh().centers))
            led.add(f"{label} identical data", (tol["identical"] * mass - max(rep.distances)) / mass)
            led.metrics[label] = {
                "mass_drift": ledger.max_relative_drift, "support_interior": ledger.valid,
                "worst_contraction_ratio": worst, "identical_distance": max(rep.distances),
            }
    return led.result(
        "pme", 7, "Porous medium: mass and L1 contraction",
        "int u(t) = int u0; int |u(t2)-v(t2)| <= int |u(t1)-v(t1)|", t0,
    )


# -- 8 ------------------------------------------------------------------------
def check_fde(tol, seed, flat_only=False) -> CheckResult:
    t0 = time.perf_counter()
    led = SubChecks()
    m_c = critical_exponent(3, 0.0)
    led.flag("m_c(3, 0) = 1/3", m_c == 1.0 / 3.0)
    led.metrics["m_c"] = m_c
    # ordered pair on the flat model (kappa = 0 uses the alpha = 2 cut-off)
    u0 = _bump(2.0, 0.0, 3.0)
    v0 = _bump(1.0, 0.0, 2.0)
    p = DiffusionProblem.on_model(0.5, 3, 0.0, 2.0, u0, 2.0, 32.0, 256, "absorbing")
    mesh = p.mesh()
    ru = run_diffusion(p, 0.01, mesh=mesh)
    rv = run_diffusion(p, 0.01, mesh=mesh, u0=v0(mesh.centers))
    ordered = all(np.all(a.u >= b.u - 1e-12) for a, b in zip(ru.states, rv.states))
    led.flag("pair stays ordered", ordered)
    inequality = {}
    for R in (4.0, 8.0, 16.0):
        for t1, t2 in ((0.0, 1.0), (0.5, 2.0), (1.0, 1.0)):
            rep = weak_conservation_inequality(p, ru, rv, R, 1.5, t1, t2)
            led.add(f"weak conservation R={R:g} [{t1:g},{t2:g}]", rep.margin / max(rep.rhs, 1e-300))
            inequality[f"R={R:g},t1={t1:g},t2={t2:g}"] = {"lhs": rep.lhs, "rhs": rep.rhs, "M": rep.M}
    led.metrics["weak_conservation"] = inequality
    reports = extinction_study(
        3, 0.0, 2.0, [0.2, 0.8], _bump(1.0, 0.0, 1.0), 2.0,
        dt=0.005, r_max=12.0, n_cells=240, gamma=1.5, radii=(0.25, 0.5, 1.0, 2.0, 4.0),
    )
    low, high = reports
    led.flag("m=0.2 extinct", low.extinction_time is not None)
    led.add("m=0.8 keeps mass", high.final_mass_fraction - tol["remaining"])
    for rep in reports:
        if rep.extinction_time is not None:
            led.add(f"m={rep.m:g} time above lower bound",
                    (rep.extinction_time - rep.lower_bound) / max(rep.extinction_time, 1e-300))
    led.metrics["extinction"] = [rep.to_dict() for rep in reports]
    return led.result(
        "fde", 8, "Fast diffusion: weak conservation and extinction",
        "(int_BR u(t2))^(1-m) <= (int_BgR u(t1))^(1-m) + M_(R,gamma)(t2-t1); T(u0) lower bound; m_c", t0,
    )


# -- 9 ------------------------------------------------------------------------
def _ladder_order(samples):
    d1 = float(np.nanmax(np.abs(samples[0] - samples[1])))
    d2 = float(np.nanmax(np.abs(samples[1] - samples[2])))
    return math.log2(d1 / d2), (d1, d2)


def check_convergence(tol, seed, flat_only=False) -> CheckResult:
    t0 = time.perf_counter()
    led = SubChecks()
    orders = {}
    kappa = 0.0 if flat_only else 1.0

    def record(name, order, changes, nominal):
        orders[name] = {"order": order, "nominal": nominal, "changes": changes}
        # slack at the one-decimal resolution used by order_meets
        led.add(name, round(order, 1) - nominal)

    # warping, one fifth-order step per interval (nominal 5, required 4)
    prof = CurvatureProfile.standard(1.0, 1.0)
    hs = [solve_warping(prof, RadialGrid.uniform(4.0, n), fixed_step=True).h[:: n // 10] for n in (20, 40, 80)]
    record("warping fixed-step", *_ladder_order(hs), nominal=4.0)
    # comparison ODE near its singular endpoint
    ps = [numeric_psi(1.0, 1.0, 5.0, np.linspace(0, 4.5, n + 1), fixed_step=True).h[:: n // 9] for n in (72, 144, 288)]
    record("comparison fixed-step", *_ladder_order(ps), nominal=4.0)
    # exhaustion: Richardson-extrapolated differences and the Riccati route
    for alpha, method in ((0.0, "fd"), (-1.0, "riccati")):
        if flat_only and alpha < 0:
            continue
        vals = []
        for spacing in (1 / 32, 1 / 64, 1 / 128):
            solver = _Solver(alpha, kappa, 3, spacing, 0.9, method)
            _, log_omega, _, _ = solver.solve(16.0, 64.0, 32.0)
            vals.append(log_omega[:: int(round(0.5 / spacing))][:60])
        order, changes = _ladder_order(vals)
        record(f"exhaustion {method} alpha={alpha:g}", order, changes, 4.0)
    # diffusion: implicit Euler in time, second order in space
    for m in (2.0, 0.6):
        p = DiffusionProblem.on_model(m, 3, kappa, 2.0 if kappa else 0.0, lambda r: 1.0 + np.exp(-r * r),
                                      0.1, 4.0, 40, "reflecting")
        tc = time_convergence(p, 0.0025)
        sc = space_convergence(p, 1e-3)
        record(f"diffusion time m={m:g}", tc.order, tc.changes, 1.0)
        record(f"diffusion space m={m:g}", sc.order, sc.changes, 2.0)
    led.metrics["orders"] = orders
    return led.result(
        "convergence", 9, "Self-convergence",
        "three-level refinement ladders; observed order log2(d1/d2)", t0,
    )


CHECKS = {
    "warping": check_warping,
    "sturm": check_sturm,
    "closed_forms": check_closed_forms,
    "cutoffs": check_cutoffs,
    "sharp_gamma": check_sharp_gamma,
    "li_yau": check_li_yau,
    "pme": check_pme,
    "fde": check_fde,
    "convergence": check_convergence,
}

# the flat preset runs every check that has a kappa = 0 counterpart
PRESETS = {
    "full": list(CHECKS),
    "flat": ["warping", "sturm", "cutoffs", "sharp_gamma", "li_yau", "pme", "fde", "convergence"],
}


def run_check(key: str, tolerances: dict | None = None, seed: int = 0, flat_only: bool = False) -> CheckResult:
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    return CHECKS[key](tol, seed, flat_only=flat_only)
