"""Radial model-manifold laboratory: warping geometry, comparison ODEs,
Laplacian cut-offs, a Li-Yau-type gradient bound and nonlinear diffusion."""

from .profiles import CurvatureProfile, DomainError, RadialGrid
from .geometry import (
    ModelManifold,
    Warping,
    bishop_gromov_ratio_check,
    laplacian_comparison,
    solve_warping,
    volume_ball,
    volume_table,
)
from .bessel import bessel_iv_kv
from .comparison import closed_form_psi, sturm_compare, sturm_pair, volume_lowerbound_chain
from .smoothstep import SmoothStep, smooth_step
from .cutoff import build_cutoff_alpha2, build_cutoff_general, build_sequence, solve_exhaustion
from .gradient import PoissonProblem, compute_bounds, solve_radial_poisson, verify_gradient_estimate
from .diffusion import (
    DiffusionProblem,
    check_l1_contraction,
    check_mass_conservation,
    critical_exponent,
    extinction_study,
    run_diffusion,
    step_diffusion,
    weak_conservation_inequality,
)

__version__ = "0.1.0"

__all__ = [
    "CurvatureProfile",
    "DomainError",
    "RadialGrid",
    "ModelManifold",
    "Warping",
    "solve_warping",
    "volume_ball",
    "volume_table",
    "laplacian_comparison",
    "bishop_gromov_ratio_check",
    "bessel_iv_kv",
    "closed_form_psi",
    "sturm_pair",
    "sturm_compare",
    "volume_lowerbound_chain",
    "SmoothStep",
    "smooth_step",
    "solve_exhaustion",
    "build_cutoff_general",
    "build_cutoff_alpha2",
    "build_sequence",
    "PoissonProblem",
    "solve_radial_poisson",
    "compute_bounds",
    "verify_gradient_estimate",
    "DiffusionProblem",
    "step_diffusion",
    "run_diffusion",
    "check_l1_contraction",
    "check_mass_conservation",
    "weak_conservation_inequality",
    "extinction_study",
    "critical_exponent",
]
