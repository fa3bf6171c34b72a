from .fields import BCKind, BoundaryCondition, BoundarySet, Field
from .linsolve import Factorization, solve_krylov
from .operators import (
    SparseOperator,
    convective_operator,
    face_flux,
    face_interp_central,
    gauss_divergence,
    gauss_gradient,
    incidence,
    interpolate_cells,
    laplacian,
    laplacian_flux,
    laplacian_matrix,
    mass_operator,
    non_orthogonal_source,
    rhie_chow_flux,
)

__all__ = [
    "BCKind",
    "BoundaryCondition",
    "BoundarySet",
    "Factorization",
    "Field",
    "SparseOperator",
    "convective_operator",
    "face_flux",
    "face_interp_central",
    "gauss_divergence",
    "gauss_gradient",
    "incidence",
    "interpolate_cells",
    "laplacian",
    "laplacian_flux",
    "laplacian_matrix",
    "mass_operator",
    "non_orthogonal_source",
    "rhie_chow_flux",
    "solve_krylov",
]
