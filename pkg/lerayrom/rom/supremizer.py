"""Approximate supremizer enrichment of the reduced velocity spaces."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from lerayrom.exceptions import ContractViolation, EnrichmentError, FingerprintError
from lerayrom.fom.physics import FlowBoundaries, SolverSettings
from lerayrom.fv import BoundarySet, Factorization, Field, gauss_gradient, laplacian_matrix, non_orthogonal_source
from lerayrom.mesh import Mesh

from .pod import PodBasis
from .snapshots import SnapshotMatrix, dof_weights

logger = logging.getLogger(__name__)

__all__ = [
    "EnrichedSpace",
    "GRAM_TOLERANCE",
    "StabilizationMode",
    "SupremizerSet",
    "SupremizerSolver",
    "enrich",
    "plain_space",
    "solve_supremizers",
]

GRAM_TOLERANCE = 1e-10


class StabilizationMode(str, enum.Enum):
    NOS = "nos"
    PPE = "ppe"
    SUP1 = "sup1"
    SUP2 = "sup2"

    @property
    def enriched(self) -> bool:
        return self in (StabilizationMode.SUP1, StabilizationMode.SUP2)


class SupremizerSolver:
    """Solves ``lap(s) = -grad(q)`` with ``s = 0`` on the whole boundary.

    The Laplacian is the full-order one; it is factorized once and reused for
    both components of every snapshot.
    """

    def __init__(
        self,
        mesh: Mesh,
        velocity_bcs: BoundarySet,
        pressure_bcs: BoundarySet,
        non_orthogonal_correctors: int = 1,
    ):
        self.mesh = mesh
        self.velocity_bcs = velocity_bcs
        self.pressure_bcs = pressure_bcs
        self.non_orthogonal_correctors = non_orthogonal_correctors
        self._lu = Factorization(-laplacian_matrix(mesh, 1.0, velocity_bcs, ncomp=2).matrix, "supremizer")

    @classmethod
    def for_flow(cls, mesh: Mesh, boundaries: FlowBoundaries, settings: SolverSettings | None = None) -> "SupremizerSolver":
        settings = settings or SolverSettings()
        return cls(mesh, boundaries.no_slip_everywhere(), boundaries.pressure(), settings.non_orthogonal_correctors)

    def solve(self, q: np.ndarray, t: float = 0.0) -> np.ndarray:
        mesh = self.mesh
        rhs = mesh.cell_volumes[:, None] * gauss_gradient(Field(mesh, q, self.pressure_bcs, "q", t))
        s = self._lu.solve(rhs)
        for _ in range(self.non_orthogonal_correctors):
            s = self._lu.solve(rhs + non_orthogonal_source(Field(mesh, s, self.velocity_bcs, "s", t), 1.0))
        return s


def solve_supremizers(pressure: SnapshotMatrix, solver: SupremizerSolver, name: str | None = None) -> SnapshotMatrix:
    """One supremizer field per pressure snapshot, in snapshot order."""

    if pressure.ncomp != 1:
        raise ContractViolation(f"'{pressure.name}' is not a pressure field")
    pressure.check_mesh(solver.mesh)
    fields = np.array([solver.solve(pressure.field(k), t) for k, t in enumerate(pressure.times)])
    if fields.size == 0:
        fields = np.zeros((0, solver.mesh.n_cells, 2))
    return SnapshotMatrix.from_fields(name or f"s_{pressure.name}", fields, pressure.times, pressure.fingerprint)


@dataclass(frozen=True)
class SupremizerSet:
    s: SnapshotMatrix
    s_bar: SnapshotMatrix

    @classmethod
    def from_pressures(cls, q: SnapshotMatrix, q_bar: SnapshotMatrix, solver: SupremizerSolver) -> "SupremizerSet":
        return cls(solve_supremizers(q, solver, "s"), solve_supremizers(q_bar, solver, "s_bar"))


@dataclass(frozen=True)
class EnrichedSpace:
    """Velocity modes followed by supremizer modes, blocks kept in order."""

    name: str
    modes: np.ndarray
    blocks: tuple[tuple[str, int], ...]
    variant: str
    fingerprint: str

    @property
    def n(self) -> int:
        return self.modes.shape[1]

    @property
    def n_cells(self) -> int:
        return self.modes.shape[0] // 2

    def block(self, name: str) -> slice:
        start = 0
        for block, size in self.blocks:
            if block == name:
                return slice(start, start + size)
            start += size
        raise KeyError(name)

    def mode(self, i: int) -> np.ndarray:
        return self.modes[:, i].reshape(-1, 2)

    def gram(self, volumes: np.ndarray) -> np.ndarray:
        weights = dof_weights(volumes, 2)
        return self.modes.T @ (weights[:, None] * self.modes)


def plain_space(name: str, basis: PodBasis) -> EnrichedSpace:
    if basis.ncomp != 2:
        raise ContractViolation(f"'{basis.field}' is not a velocity basis")
    return EnrichedSpace(name, basis.modes, ((basis.field, basis.n_modes),), "none", basis.fingerprint)


def enrich(
    name: str,
    velocity: PodBasis,
    supremizers: Sequence[PodBasis],
    variant: StabilizationMode | str,
    volumes: np.ndarray,
) -> EnrichedSpace:
    """Concatenate ``velocity`` and ``supremizers`` and reject near-dependent columns."""

    variant = StabilizationMode(variant)
    if not variant.enriched:
        raise ContractViolation(f"{variant.value} does not enrich the velocity space")
    parts = [velocity, *supremizers]
    for basis in parts:
        if basis.fingerprint != velocity.fingerprint:
            raise FingerprintError(velocity.fingerprint, basis.fingerprint, f"basis '{basis.field}'")
        if basis.ncomp != 2:
            raise ContractViolation(f"'{basis.field}' is not a vector basis")
    space = EnrichedSpace(
        name,
        np.hstack([basis.modes for basis in parts]),
        tuple((basis.field, basis.n_modes) for basis in parts),
        variant.value,
        velocity.fingerprint,
    )
    if space.n:
        sigma_min = float(linalg.svdvals(space.gram(volumes)).min())
        if sigma_min <= GRAM_TOLERANCE:
            raise EnrichmentError(
                f"{name} space is nearly dependent (smallest Gram singular value {sigma_min:.3e}); "
                "use fewer supremizer modes"
            )
        logger.info("%s space %s: %s, Gram sigma_min %.3e", variant.value, name, dict(space.blocks), sigma_min)
    return space
