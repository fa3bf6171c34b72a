"""Cell-centred fields and per-patch boundary conditions."""

from __future__ import annotations

import enum
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Union

import numpy as np

from lerayrom.exceptions import ContractViolation
from lerayrom.mesh import Mesh

__all__ = ["BCKind", "BoundaryCondition", "BoundarySet", "Field"]

# A profile receives the patch face centres (n, 2) and the time.
Profile = Callable[[np.ndarray, float], np.ndarray]
BCValue = Union[float, np.ndarray, Profile]


class BCKind(enum.IntEnum):
    FIXED_VALUE = 0
    ZERO_GRADIENT = 1
    FIXED_GRADIENT = 2


@dataclass(frozen=True)
class BoundaryCondition:
    kind: BCKind
    value: BCValue = 0.0

    @classmethod
    def fixed_value(cls, value: BCValue = 0.0) -> "BoundaryCondition":
        return cls(BCKind.FIXED_VALUE, value)

    @classmethod
    def zero_gradient(cls) -> "BoundaryCondition":
        return cls(BCKind.ZERO_GRADIENT, 0.0)

    @classmethod
    def fixed_gradient(cls, gradient: BCValue) -> "BoundaryCondition":
        return cls(BCKind.FIXED_GRADIENT, gradient)

    def evaluate(self, centres: np.ndarray, t: float, ncomp: int) -> np.ndarray:
        value = self.value(centres, t) if callable(self.value) else self.value
        value = np.asarray(value, dtype=np.float64)
        if value.ndim == 1 and value.shape[0] == len(centres) and ncomp == 1:
            value = value[:, None]
        return np.array(np.broadcast_to(value, (len(centres), ncomp)))

    def homogeneous(self) -> "BoundaryCondition":
        return replace(self, value=0.0)


class BoundarySet(Mapping):
    """Boundary conditions keyed by patch name."""

    def __init__(self, conditions: Mapping[str, BoundaryCondition]):
        self._conditions = dict(conditions)

    def __getitem__(self, name: str) -> BoundaryCondition:
        return self._conditions[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._conditions)

    def __len__(self) -> int:
        return len(self._conditions)

    def __repr__(self) -> str:
        kinds = ", ".join(f"{k}={bc.kind.name}" for k, bc in self._conditions.items())
        return f"BoundarySet({kinds})"

    def check(self, mesh: Mesh) -> None:
        missing = [p for p in mesh.patch_names if p not in self._conditions]
        if missing:
            raise ContractViolation(f"no boundary condition for patch(es) {missing}")

    def homogeneous(self) -> "BoundarySet":
        return BoundarySet({k: bc.homogeneous() for k, bc in self._conditions.items()})

    def kinds(self, mesh: Mesh) -> np.ndarray:
        out = np.empty(mesh.n_boundary, dtype=np.int8)
        for patch in mesh.patches:
            lo = patch.start - mesh.n_internal
            out[lo : lo + patch.size] = self._conditions[patch.name].kind
        return out

    def values(self, mesh: Mesh, t: float, ncomp: int) -> np.ndarray:
        """Prescribed value or gradient per boundary face (zero for zero-gradient)."""

        out = np.zeros((mesh.n_boundary, ncomp))
        for patch in mesh.patches:
            bc = self._conditions[patch.name]
            if bc.kind is BCKind.ZERO_GRADIENT or patch.size == 0:
                continue
            lo = patch.start - mesh.n_internal
            out[lo : lo + patch.size] = bc.evaluate(mesh.face_centres[patch.faces], t, ncomp)
        return out


@dataclass
class Field:
    """Scalar ``(n_cells,)`` or 2-vector ``(n_cells, 2)`` cell values with BCs."""

    mesh: Mesh
    values: np.ndarray
    boundary: BoundarySet
    name: str = ""
    time: float = 0.0
    _columns: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape not in ((self.mesh.n_cells,), (self.mesh.n_cells, 2)):
            raise ContractViolation(
                f"field '{self.name}' has shape {values.shape}; expected ({self.mesh.n_cells},) or ({self.mesh.n_cells}, 2)"
            )
        self.boundary.check(self.mesh)
        self.values = values
        self._columns = values.reshape(self.mesh.n_cells, -1)

    @property
    def ncomp(self) -> int:
        return self._columns.shape[1]

    @property
    def is_vector(self) -> bool:
        return self.values.ndim == 2

    @property
    def columns(self) -> np.ndarray:
        return self._columns

    def boundary_values(self) -> np.ndarray:
        """Face values on every boundary face, shape ``(n_boundary, ncomp)``."""

        mesh = self.mesh
        kinds = self.boundary.kinds(mesh)
        prescribed = self.boundary.values(mesh, self.time, self.ncomp)
        owner_values = self._columns[mesh.owner[mesh.boundary]]
        out = np.where((kinds == BCKind.FIXED_VALUE)[:, None], prescribed, owner_values)
        graded = kinds == BCKind.FIXED_GRADIENT
        if graded.any():
            distance = boundary_normal_distance(mesh)
            out[graded] = owner_values[graded] + prescribed[graded] * distance[graded, None]
        return out

    def with_values(self, values: np.ndarray, name: str | None = None) -> "Field":
        return Field(self.mesh, values, self.boundary, name or self.name, self.time)

    def at(self, time: float) -> "Field":
        return Field(self.mesh, self.values, self.boundary, self.name, time)


def boundary_normal_distance(mesh: Mesh) -> np.ndarray:
    b = mesh.boundary
    return np.abs(np.einsum("ij,ij->i", mesh.deltas[b], mesh.face_normals[b]))
