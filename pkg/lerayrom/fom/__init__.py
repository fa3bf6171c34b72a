from .physics import FlowBoundaries, InletLaw, PhysicsConfig, SolverSettings, bdf_coefficients
from .runner import FomRun, run_fom, snapshot_steps
from .stepper import (
    CoupledSolution,
    EvolveFilterSolver,
    FomState,
    GeneralizedStokesSolver,
    continuity_residual,
    kinetic_energy,
)

__all__ = [
    "CoupledSolution",
    "EvolveFilterSolver",
    "FlowBoundaries",
    "FomRun",
    "FomState",
    "GeneralizedStokesSolver",
    "InletLaw",
    "PhysicsConfig",
    "SolverSettings",
    "bdf_coefficients",
    "continuity_residual",
    "kinetic_energy",
    "run_fom",
    "snapshot_steps",
]
