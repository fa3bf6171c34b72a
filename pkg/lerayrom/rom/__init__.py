"""POD-Galerkin reduced model of the Evolve-Filter scheme."""

from .assembly import OperatorAssembler, ReducedOperators, RomSpaces, build_spaces, convection_matrix, tensor_contract
from .online import ReducedModel, RomRun, RomState, init_state, reconstruct, run_rom
from .pod import PodBasis, compute_basis, correlation_matrix, cumulative_table, load_basis, projection_error, save_basis
from .snapshots import (
    LiftingFunction,
    SnapshotMatrix,
    SnapshotSet,
    build_lifting,
    dehomogenize,
    dof_weights,
    homogenize,
    l2_inner,
    load_snapshots,
    save_snapshots,
)
from .supremizer import (
    EnrichedSpace,
    StabilizationMode,
    SupremizerSet,
    SupremizerSolver,
    enrich,
    plain_space,
    solve_supremizers,
)

__all__ = [
    "EnrichedSpace",
    "LiftingFunction",
    "OperatorAssembler",
    "PodBasis",
    "ReducedModel",
    "ReducedOperators",
    "RomRun",
    "RomSpaces",
    "RomState",
    "SnapshotMatrix",
    "SnapshotSet",
    "StabilizationMode",
    "SupremizerSet",
    "SupremizerSolver",
    "build_lifting",
    "build_spaces",
    "compute_basis",
    "convection_matrix",
    "correlation_matrix",
    "cumulative_table",
    "dehomogenize",
    "dof_weights",
    "enrich",
    "homogenize",
    "init_state",
    "l2_inner",
    "load_basis",
    "load_snapshots",
    "plain_space",
    "projection_error",
    "reconstruct",
    "run_rom",
    "save_basis",
    "save_snapshots",
    "solve_supremizers",
    "tensor_contract",
]
