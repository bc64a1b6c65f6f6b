"""cpfock: completely positive maps, Fock-space Poisson kernels, and their invariants.

A Kraus family {A_i} of d x d complex matrices defines phi(X) = sum A_i X A_i^*.
This package computes the structure attached to such maps: subinvariant cones
and fixed-point spaces, canonical / ergodic / Wold decompositions, Poisson
kernels and transforms on truncated Fock spaces, similarity certificates
(unital / contractive / strictly contractive / pure), and curvature-type
numerical invariants (the *-curvature pair F and the Euler characteristic).
"""

from .cpmap import (
    KrausFamily,
    MapClassification,
    Superoperator,
    apply,
    apply_adjoint,
    classify,
    direct_sum,
    map_norm_power,
    power_apply,
    spectral_radius,
)
from .ergodic import (
    CanonicalDecomposition,
    WoldDecomposition,
    canonical_decomposition,
    cesaro_limit,
    cesaro_mean,
    classify_solution,
    extract_row_contraction,
    fixed_point_space,
    invariant_subspaces_from_solution,
    phi_infinity,
    projection_invariance_test,
    pure_solution_kernel_check,
    wold_decomposition,
)
from .fock import CreationFamily, TruncatedFock, analytic_poly_norm, build_fock, word_operator
from .invariants import (
    CurvatureReport,
    EulerReport,
    FInvariant,
    alpha_curvature,
    euler_characteristic,
    f_invariant,
    free_module_check,
    module_rank,
    scale_construction,
    star_curvature,
)
from .kernels import backend
from .linalg import DEFAULT_TOL, HermitianOperator, Tolerance
from .poisson import (
    PoissonKernel,
    build_kernel,
    cb_bound_check,
    intertwining_residual,
    kernel_gram,
    moment_matrix_psd,
    poisson_transform,
    subinvariance_check,
    symmetric_range_check,
)
from .similarity import (
    SimilarityCertificate,
    conjugate_map,
    find_contractive_similarity,
    find_pure_contractive_similarity,
    find_strict_contraction_similarity,
    find_unital_similarity,
    injective_fixed_point,
    neumann_bound_check,
    power_similarity_lift,
    solve_stein,
    spectral_radius_infimum,
)

__version__ = "0.1.0"

__all__ = [
    "backend",
    "__version__",
    "Tolerance",
    "DEFAULT_TOL",
    "HermitianOperator",
    "KrausFamily",
    "Superoperator",
    "MapClassification",
    "apply",
    "apply_adjoint",
    "power_apply",
    "map_norm_power",
    "spectral_radius",
    "classify",
    "direct_sum",
    "TruncatedFock",
    "CreationFamily",
    "build_fock",
    "word_operator",
    "analytic_poly_norm",
    "PoissonKernel",
    "subinvariance_check",
    "build_kernel",
    "kernel_gram",
    "intertwining_residual",
    "poisson_transform",
    "cb_bound_check",
    "moment_matrix_psd",
    "symmetric_range_check",
    "CanonicalDecomposition",
    "WoldDecomposition",
    "phi_infinity",
    "canonical_decomposition",
    "cesaro_mean",
    "cesaro_limit",
    "wold_decomposition",
    "classify_solution",
    "fixed_point_space",
    "extract_row_contraction",
    "pure_solution_kernel_check",
    "invariant_subspaces_from_solution",
    "projection_invariance_test",
    "SimilarityCertificate",
    "conjugate_map",
    "find_unital_similarity",
    "solve_stein",
    "find_strict_contraction_similarity",
    "find_pure_contractive_similarity",
    "find_contractive_similarity",
    "spectral_radius_infimum",
    "injective_fixed_point",
    "power_similarity_lift",
    "neumann_bound_check",
    "CurvatureReport",
    "EulerReport",
    "FInvariant",
    "star_curvature",
    "alpha_curvature",
    "euler_characteristic",
    "f_invariant",
    "module_rank",
    "free_module_check",
    "scale_construction",
]
