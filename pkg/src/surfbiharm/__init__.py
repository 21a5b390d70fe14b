"""Unfitted C0 interior penalty discretization of the surface biharmonic
equation on an implicitly defined closed surface, with a convergence-study
driver for the unit sphere."""

from .assembly import FormParams, assemble_a, assemble_rhs, assemble_s
from .fespace import build_p2_space, eval_basis, mean_vector
from .geometry import (
    JetField,
    exact_data,
    extend,
    harmonic_data,
    surface_bilaplacian_field,
    surface_gradient,
    surface_hessian_laplacian,
    unit_sphere,
)
from .mesh import (
    build_background_mesh,
    cut_tet,
    extract_cut_complex,
    interpolate_levelset,
)
from .quadrature import gauss_segment, gauss_triangle, integrate_polygon
from .solver import solve_bordered_dense, solve_constrained
from .study import (
    ErrorTriple,
    StudyConfig,
    StudyReport,
    compute_errors,
    energy_norm,
    format_report,
    rates,
    run_study,
)

__version__ = "0.1.0"
