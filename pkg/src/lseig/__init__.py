"""Least-squares finite element eigensolvers for the Dirichlet Laplacian.

Meshes, lowest-order H(div) and H1 spaces, block pencils of the FOSLS, transposed
FOSLS, LL* and curl-enriched formulations, their Schur-reduced eigensolvers, a
residual estimator with Dörfler-driven adaptivity, and experiment drivers.
"""
from .assembly import assemble, verify_transpose_identity
from .eigsolve import (
    BlockPencil,
    EigenPair,
    FamilyReport,
    classify_families,
    map_llstar_eigenvalue,
    schur_reduce,
    solve_finite_spectrum,
)
from .estimator import IndicatorField, adapt_loop, estimate, mark_dorfler
from .experiments import ExperimentConfig, run_adaptive, run_apriori, run_curl_failure
from .fespace import FeFunction, FeSpace, build_space, interpolate
from .formulations import (
    FormulationSpec,
    apply_discrete_solution_operator,
    build_pencil,
    compute_error_norms,
    solve_eigen,
    square_mode,
)
from .mesh import DomainSpec, Mesh, build_initial_mesh, check_conformity, mesh_metrics, refine_marked, refine_uniform
from .reference import load_lshape_reference

__version__ = "0.1.0"

__all__ = [
    "assemble", "verify_transpose_identity",
    "BlockPencil", "EigenPair", "FamilyReport", "classify_families", "map_llstar_eigenvalue",
    "schur_reduce", "solve_finite_spectrum",
    "IndicatorField", "adapt_loop", "estimate", "mark_dorfler",
    "ExperimentConfig", "run_adaptive", "run_apriori", "run_curl_failure",
    "FeFunction", "FeSpace", "build_space", "interpolate",
    "FormulationSpec", "apply_discrete_solution_operator", "build_pencil", "compute_error_norms",
    "solve_eigen", "square_mode",
    "DomainSpec", "Mesh", "build_initial_mesh", "check_conformity", "mesh_metrics", "refine_marked",
    "refine_uniform", "load_lshape_reference",
]
