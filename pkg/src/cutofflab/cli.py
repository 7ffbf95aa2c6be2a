"""Command-line front end.

Subcommands ``geometry``, ``cutoff``, ``lyau``, ``diffusion`` and
``verify-all``.  Parameters come from built-in defaults, then an optional
INI file (``--config``; a ``[run]`` section, an optional section named after
the subcommand, and a ``[tolerances]`` section), then flags.

Exit status: 0 when every check passes, 1 when a check fails, 2 for an
invalid configuration or an unwritable output directory.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cutoff import CutoffError, ExhaustionError, sweep_summary
from .diffusion import (
    EXTINCTION_FRACTION,
    DiffusionProblem,
    extinction_lower_bound,
    run_diffusion,
    strong_solution_monitor,
    weak_conservation_inequality,
)
from .geometry import bishop_gromov_ratio_check, solve_warping, volume_table
from .gradient import PoissonProblem, compute_bounds, solve_radial_poisson, verify_gradient_estimate
from .profiles import CurvatureProfile, RadialGrid
from .report import ReportError, config_hash, emit_report
from .suite import (
    DEFAULT_TOLERANCES,
    PRESETS,
    CheckResult,
    SubChecks,
    cutoff_sweep,
    cutoff_sweep_slacks,
    run_check,
)

__all__ = ["ConfigError", "RunConfig", "build_parser", "load_config", "run_subcommand", "main"]

COMMANDS = ("geometry", "cutoff", "lyau", "diffusion", "verify-all")
OUT_ENV = "CUTOFFLAB_OUT"
DEFAULT_OUT = "cutofflab-out"


class ConfigError(ValueError):
    """A parameter outside its documented range."""


@dataclass
class RunConfig:
    command: str
    alpha: float = 0.0
    kappa: float = 1.0
    d: int = 3
    gamma: float = 2.0
    R: tuple = (1.0, 2.0, 4.0, 8.0, 16.0)
    m: float = 2.0
    grid_n: int | None = None
    dt: float = 0.01
    horizon: float = 1.0
    r_max: float | None = None
    t: float = 0.25
    seed: int = 0
    preset: str = "full"
    workers: int = 1
    out: str = ""
    tolerances: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown subcommand {self.command!r}")
        if not -2.0 <= self.alpha <= 2.0:
            raise ConfigError(f"alpha must lie in [-2, 2], got {self.alpha}")
        if self.kappa < 0:
            raise ConfigError(f"kappa must be >= 0, got {self.kappa}")
        if self.d < 2:
            raise ConfigError(f"d must be an integer >= 2, got {self.d}")
        if not self.gamma > 1:
            raise ConfigError(f"gamma must be > 1, got {self.gamma}")
        if not self.m > 0:
            raise ConfigError(f"m must be > 0, got {self.m}")
        if self.command == "diffusion" and self.m == 1:
            raise ConfigError("m must differ from 1 for diffusion runs (m > 1 porous medium, 0 < m < 1 fast diffusion)")
        if not self.R or any(not R > 0 for R in self.R):
            raise ConfigError(f"R must be a nonempty list of positive radii, got {list(self.R)}")
        if self.grid_n is not None and self.grid_n < 8:
            raise ConfigError(f"grid-n must be >= 8, got {self.grid_n}")
        if not self.dt > 0 or not self.horizon > 0:
            raise ConfigError("dt and horizon must be positive")
        if self.command == "diffusion" and abs(round(self.horizon / self.dt) * self.dt - self.horizon) > 1e-9 * self.horizon:
            raise ConfigError(f"horizon {self.horizon} must be a multiple of dt {self.dt}")
        if self.r_max is not None and not self.r_max > 0:
            raise ConfigError(f"r-max must be positive, got {self.r_max}")
        if not 0 < self.t < 1:
            raise ConfigError(f"t must lie in (0, 1), got {self.t}")
        if self.preset not in PRESETS:
            raise ConfigError(f"preset must be one of {sorted(PRESETS)}, got {self.preset!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        for key, value in self.tolerances.items():
            if key not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance {key!r}")
            if not value > 0:
                raise ConfigError(f"tolerance {key} must be positive, got {value}")
        return self

    def identity(self) -> dict:
        """Everything that determines the results (not where they are written)."""
        data = asdict(self)
        data.pop("out")
        data.pop("workers")
        data["R"] = list(self.R)
        data["tolerances"] = {**DEFAULT_TOLERANCES, **self.tolerances}
        return data

    @property
    def hash(self) -> str:
        return config_hash(self.identity())


# -- parsing -----------------------------------------------------------------
def _radii(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    try:
        return tuple(float(x) for x in str(text).split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"R must be a comma-separated list of numbers, got {text!r}") from exc


_CASTS = {
    "alpha": float, "kappa": float, "d": int, "gamma": float, "R": _radii, "m": float,
    "grid_n": int, "dt": float, "horizon": float, "r_max": float, "t": float, "seed": int,
    "preset": str, "workers": int, "out": str,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [run], [<subcommand>] and [tolerances] sections")
    common.add_argument("--alpha", type=float)
    common.add_argument("--kappa", type=float)
    common.add_argument("--d", type=int)
    common.add_argument("--gamma", type=float)
    common.add_argument("--R", type=str, help="comma-separated radii")
    common.add_argument("--m", type=float)
    common.add_argument("--grid-n", dest="grid_n", type=int)
    common.add_argument("--dt", type=float)
    common.add_argument("--horizon", type=float)
    common.add_argument("--r-max", dest="r_max", type=float)
    common.add_argument("--t", type=float, help="inner fraction of the gradient-estimate annulus")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})")
    for key in DEFAULT_TOLERANCES:
        common.add_argument(f"--tol-{key.replace('_', '-')}", dest=f"tol_{key}", type=float)

    parser = argparse.ArgumentParser(prog="cutofflab", description="Model-manifold cut-off laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("geometry", parents=[common], help="warping function and ball volumes")
    sub.add_parser("cutoff", parents=[common], help="cut-off sweep over R")
    sub.add_parser("lyau", parents=[common], help="gradient estimate verification")
    sub.add_parser("diffusion", parents=[common], help="porous medium / fast diffusion run")
    va = sub.add_parser("verify-all", parents=[common], help="run the verification suite")
    va.add_argument("--preset", choices=sorted(PRESETS))
    return parser


def _read_ini(path: str, command: str) -> tuple[dict, dict]:
    ini = configparser.ConfigParser()
    ini.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            ini.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values: dict = {}
    for section in ("run", command):
        if ini.has_section(section):
            values.update({k.replace("-", "_"): v for k, v in ini.items(section)})
    tols = {}
    if ini.has_section("tolerances"):
        for k, v in ini.items("tolerances"):
            tols[k.replace("-", "_")] = v
    return values, tols


def load_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    tols: dict = {}
    if args.config:
        values, tols = _read_ini(args.config, args.command)
    for name in _CASTS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    for key in DEFAULT_TOLERANCES:
        flag = getattr(args, f"tol_{key}", None)
        if flag is not None:
            tols[key] = flag
    unknown = set(values) - set(_CASTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    typed = {}
    for name, raw in values.items():
        try:
            typed[name] = _CASTS[name](raw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    try:
        tol_typed = {k: float(v) for k, v in tols.items()}
    except ValueError as exc:
        raise ConfigError(f"tolerances must be numbers: {exc}") from exc
    cfg = RunConfig(command=args.command, tolerances=tol_typed, **typed)
    if not cfg.out:
        cfg.out = os.environ.get(OUT_ENV) or DEFAULT_OUT
    return cfg.validate()


# -- subcommands -------------------------------------------------------------
def _tol(cfg: RunConfig) -> dict:
    return {**DEFAULT_TOLERANCES, **cfg.tolerances}


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc


def _failure(key, title, reference, exc) -> CheckResult:
    return CheckResult(key, None, title, reference, False, -math.inf, f"{type(exc).__name__}: {exc}")


def run_geometry(cfg: RunConfig, out: Path) -> list:
    started = time.perf_counter()
    led = SubChecks()
    prof = CurvatureProfile.standard(cfg.kappa, cfg.alpha)
    r_max = max(cfg.R)
    grid = RadialGrid.uniform(r_max, cfg.grid_n or max(400, int(100 * r_max)))
    w = solve_warping(prof, grid)
    table = volume_table(w, cfg.d, sorted(cfg.R))
    _write(out / "geometry_volume.csv", table.to_csv())
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["r", "h", "h_prime"])
    for row in zip(grid.nodes, w.h, w.h_prime):
        wr.writerow([repr(float(x)) for x in row])
    _write(out / "geometry_warping.csv", buf.getvalue())
    led.flag("ball volume increasing", table.strictly_increasing())
    bg = bishop_gromov_ratio_check(CurvatureProfile.constant(0.0), prof, cfg.d, sorted(cfg.R), grid=grid,
                                   tol=_tol(cfg)["sturm"])
    led.add("flat-to-model volume ratio nonincreasing", _tol(cfg)["sturm"] - bg.max_increase)
    led.metrics.update(radii=list(table.radii), volumes=list(table.volumes), ratios=list(bg.ratios))
    return [led.result("geometry", None, "Model geometry", "V_0(R)/V_G(R) nonincreasing for G >= 0", started)]


def run_cutoff(cfg: RunConfig, out: Path) -> list:
    started = time.perf_counter()
    led = SubChecks()
    radii = sorted(cfg.R)
    try:
        cuts = cutoff_sweep(cfg.alpha, cfg.kappa, cfg.d, cfg.gamma, radii)
    except (CutoffError, ExhaustionError) as exc:
        return [_failure("cutoff", "Cut-off construction", "exhaustion and cut-off preconditions", exc)]
    summary = {"config_hash": cfg.hash, "sweep": sweep_summary(cuts)}
    _write(out / "cutoff_summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for R, cut in zip(radii, cuts):
        _write(out / f"cutoff_R{R:g}.csv", cut.to_csv())
    cutoff_sweep_slacks(led, "sweep", cuts, _tol(cfg), spread=len(cuts) > 1,
                        decay=radii[-1] / radii[0] >= _tol(cfg)["decay"])
    return [led.result(
        "cutoff", None, "Laplacian cut-off sweep",
        "0 <= phi_R <= 1, |grad phi_R| <= C1/R, |Lap phi_R| <= C2/R^(1+alpha/2)", started,
    )]


def run_lyau(cfg: RunConfig, out: Path) -> list:
    started = time.perf_counter()
    led = SubChecks()
    prof = CurvatureProfile.standard(cfg.kappa, cfg.alpha)
    rows = []
    for R1 in sorted(cfg.R):
        p = PoissonProblem.linear_reaction(cfg.alpha, R1, cfg.gamma, cfg.t)
        sol = solve_radial_poisson(p, prof, cfg.d, n=cfg.grid_n or 4000)
        rep = verify_gradient_estimate(p, sol, compute_bounds(p, sol, cfg.d, prof))
        doc = rep.to_dict() | {"config_hash": cfg.hash}
        _write(out / f"lyau_R{R1:g}.json", json.dumps(doc, indent=2, sort_keys=True, default=float) + "\n")
        led.add(f"bound R1={R1:g}", rep.margin_min / max(rep.B, 1e-300))
        rows.append((R1, rep.B, rep.sup_lhs, rep.margin_min, rep.lam))
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["R1", "B", "sup_lhs", "margin_min", "lambda"])
    for row in rows:
        wr.writerow([repr(float(x)) for x in row])
    _write(out / "lyau_summary.csv", buf.getvalue())
    if len(rows) > 1:
        scaled = [r[2] * r[0] ** cfg.alpha for r in rows]
        spread = max(scaled) / min(scaled)
        led.add("R1 scaling spread", (_tol(cfg)["spread"] - spread) / _tol(cfg)["spread"])
        led.metrics["scaled_sup"] = scaled
    return [led.result("lyau", None, "Li-Yau gradient bound", "(w'/w)^2 <= B on B_(R1)", started)]


def run_diffusion_command(cfg: RunConfig, out: Path) -> list:
    started = time.perf_counter()
    led = SubChecks()
    fast = cfg.m < 1
    # on the flat model the alpha = 2 cut-off construction is the scale-free one
    alpha = 2.0 if cfg.kappa == 0 else cfg.alpha
    radii = sorted(cfg.R)
    r_max = cfg.r_max or (max(12.0, cfg.gamma * radii[-1]) if fast else 8.0)
    n_cells = cfg.grid_n or int(math.ceil(25 * r_max))
    u0 = lambda r: np.maximum(0.0, 1.0 - r * r) ** 2  # noqa: E731
    p = DiffusionProblem.on_model(cfg.m, cfg.d, cfg.kappa, alpha, u0, cfg.horizon, r_max, n_cells)
    mesh = p.mesh()
    run = run_diffusion(p, cfg.dt, mesh=mesh, stop_below=EXTINCTION_FRACTION if fast else None)
    _write(out / "diffusion_manifest.json",
           json.dumps(p.manifest(cfg.dt) | {"config_hash": cfg.hash}, indent=2, sort_keys=True) + "\n")
    _write(out / "diffusion_timeseries.csv", run.to_csv())
    masses = run.masses
    if not fast:
        drift = float(np.max(np.abs(masses - masses[0])) / masses[0])
        led.flag("support interior", run.boundary_ok)
        led.add("mass drift", (_tol(cfg)["mass"] - drift) / _tol(cfg)["mass"])
        led.metrics["mass_drift"] = drift
        title, ref = "Porous medium mass ledger", "int u(t) = int u0"
    else:
        hit = np.nonzero(masses < EXTINCTION_FRACTION * masses[0])[0]
        t_ext = float(run.times[hit[0]]) if hit.size else None
        bound, R_best = extinction_lower_bound(p, run.states[0].u, mesh, radii, cfg.gamma)
        if t_ext is not None:
            led.add("extinction time above lower bound", (t_ext - bound) / t_ext)
        reports = []
        for R in radii:
            if cfg.gamma * R > r_max:
                continue
            rep = weak_conservation_inequality(p, run, None, R, cfg.gamma, 0.0, float(run.times[-1]))
            led.add(f"weak conservation R={R:g}", rep.margin / max(rep.rhs, 1e-300))
            reports.append(rep.to_dict())
        _write(out / "diffusion_inequality.json", json.dumps(reports, indent=2, sort_keys=True) + "\n")
        led.metrics.update(
            extinction_time=t_ext, lower_bound=bound, bound_radius=R_best,
            final_mass_fraction=float(masses[-1] / masses[0]),
            strong_solution=strong_solution_monitor(run, radii, cfg.gamma),
        )
        title, ref = "Fast diffusion mass inequality", "(int_BR u(t))^(1-m) <= (int_BgR u0)^(1-m) + M t"
    return [led.result("diffusion", None, title, ref, started)]


def _suite_job(args):
    key, tol, seed, flat = args
    return run_check(key, tol, seed, flat)


def run_verify_all(cfg: RunConfig, out: Path) -> list:
    flat = cfg.preset == "flat"
    jobs = [(key, cfg.tolerances, cfg.seed, flat) for key in PRESETS[cfg.preset]]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_suite_job, jobs))
    return [_suite_job(job) for job in jobs]


_RUNNERS = {
    "geometry": run_geometry,
    "cutoff": run_cutoff,
    "lyau": run_lyau,
    "diffusion": run_diffusion_command,
    "verify-all": run_verify_all,
}


def run_subcommand(cfg: RunConfig) -> tuple[int, list]:
    """Run one subcommand, write its artifacts and report; return (status, results)."""
    out = Path(cfg.out)
    results = _RUNNERS[cfg.command](cfg, out)
    name = cfg.command.replace("-", "_") + "_report"
    emit_report(results, out, cfg.identity(), name=name)
    status = 0 if all(r.passed for r in results) else 1
    return status, results


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        status, results = run_subcommand(cfg)
    except (ConfigError, ReportError) as exc:
        print(f"cutofflab: error: {exc}", file=sys.stderr)
        return 2
    for r in sorted(results, key=lambda r: (r.passed, r.margin)):
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark} {r.key}: margin {r.margin:.3g} ({r.detail})")
    if status:
        first = next(r for r in sorted(results, key=lambda r: r.margin) if not r.passed)
        print(f"cutofflab: verification failed: {first.title}: {first.detail}", file=sys.stderr)
    print(f"report: {Path(cfg.out) / (cfg.command.replace('-', '_') + '_report.json')} (config {cfg.hash})")
    return status


if __name__ == "__main__":
    sys.exit(main())
