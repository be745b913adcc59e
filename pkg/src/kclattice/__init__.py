"""Ground states of Kirchhoff-Choquard equations on the integer lattice.

The package computes discrete Riesz-type Green's functions of the lattice
fractional Laplacian, assembles the Kirchhoff-Choquard energy on finite
boxes, finds ground states by Nehari-manifold reduction, and ships an
executable property suite that stress-tests the variational structure
(mountain-pass geometry, convolution inequalities, fiber monotonicity,
level identities, symmetry).
"""

from .lattice import (
    DIRICHLET,
    PERIODIC,
    Field,
    LatticeBox,
    gradient_energy,
    gradient_inner,
    h_inner,
    h_norm,
    laplacian,
    load_field_binary,
    load_field_text,
    lp_norm,
    save_field_binary,
    save_field_text,
    translate,
)
from .kernel import (
    HEAT_KERNEL,
    TORUS_QUADRATURE,
    GreenKernel,
    QuadratureError,
    build_kernel,
    cache_key,
    convolve,
    fit_decay_exponent,
    fractional_degree,
    fractional_degree_refined,
    green_value,
    green_values,
    laplace_symbol,
)
from .energy import (
    COERCIVE,
    CONSTANT,
    PERIODIC_POTENTIAL,
    Nonlinearity,
    PotentialSpec,
    PowerNonlinearity,
    ProblemSpec,
    energy,
    energy_gradient,
    interaction_energy,
    interaction_pairing,
    pairing,
)
from .nehari import (
    FILE_START,
    GAUSSIAN_BUMP,
    RANDOM_START,
    FiberCoefficients,
    SolveConfig,
    SolveReport,
    fiber_coefficients,
    gaussian_bump_field,
    mountain_pass_level_check,
    nehari_scale,
    project_to_nehari,
    random_start_field,
    reduced_gradient,
    solve_ground_state,
    sphere_inverse,
)
from .kernel import set_fft_workers
from .verify import (
    PropertyReport,
    check_box_convergence,
    check_fiber_monotonicity,
    check_hls,
    check_kernel_integrity,
    check_level_identity,
    check_mountain_pass_geometry,
    check_symmetry_and_translation,
    run_suite,
    suite_csv,
    suite_passed,
    suite_summary,
)
from .config import ConfigError, RunConfig

__version__ = "0.1.0"

__all__ = [
    "DIRICHLET",
    "PERIODIC",
    "HEAT_KERNEL",
    "TORUS_QUADRATURE",
    "GAUSSIAN_BUMP",
    "RANDOM_START",
    "FILE_START",
    "CONSTANT",
    "COERCIVE",
    "PERIODIC_POTENTIAL",
    "ConfigError",
    "Field",
    "LatticeBox",
    "GreenKernel",
    "PropertyReport",
    "QuadratureError",
    "Nonlinearity",
    "PotentialSpec",
    "PowerNonlinearity",
    "ProblemSpec",
    "RunConfig",
    "FiberCoefficients",
    "SolveConfig",
    "SolveReport",
    "check_box_convergence",
    "check_fiber_monotonicity",
    "check_hls",
    "check_kernel_integrity",
    "check_level_identity",
    "check_mountain_pass_geometry",
    "check_symmetry_and_translation",
    "run_suite",
    "suite_csv",
    "suite_passed",
    "suite_summary",
    "set_fft_workers",
    "build_kernel",
    "cache_key",
    "convolve",
    "energy",
    "energy_gradient",
    "fiber_coefficients",
    "fit_decay_exponent",
    "fractional_degree",
    "fractional_degree_refined",
    "gaussian_bump_field",
    "gradient_energy",
    "gradient_inner",
    "green_value",
    "green_values",
    "h_inner",
    "h_norm",
    "interaction_energy",
    "interaction_pairing",
    "laplace_symbol",
    "laplacian",
    "load_field_binary",
    "load_field_text",
    "lp_norm",
    "mountain_pass_level_check",
    "nehari_scale",
    "pairing",
    "project_to_nehari",
    "random_start_field",
    "reduced_gradient",
    "save_field_binary",
    "save_field_text",
    "solve_ground_state",
    "sphere_inverse",
    "translate",
]
