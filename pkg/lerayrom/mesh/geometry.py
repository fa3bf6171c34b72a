"""Immutable polygonal 2D finite-volume mesh.

Faces are straight edges between two vertices.  The face area vector of the
edge ``a -> b`` is ``(b_y - a_y, -(b_x - a_x))`` which points out of the owner
cell when the owner is traversed counter-clockwise.  Internal faces come first
(sorted by owner, then neighbour); boundary faces follow, grouped by patch.
Cell "volumes" are areas with unit depth.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from lerayrom.exceptions import MeshGenerationError, MeshValidationError

__all__ = ["Mesh", "Patch", "build_mesh", "cross2"]


def cross2(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """z-component of the cross product of stacked 2D vectors."""

    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


@dataclass(frozen=True)
class Patch:
    name: str
    start: int
    size: int

    @property
    def faces(self) -> slice:
        return slice(self.start, self.start + self.size)


class Mesh:
    """Face-addressed 2D mesh with precomputed geometry."""

    def __init__(
        self,
        points: np.ndarray,
        faces: np.ndarray,
        owner: np.ndarray,
        neighbour: np.ndarray,
        patches: Sequence[Patch],
    ):
        self.points = _frozen(np.asarray(points, dtype=np.float64).reshape(-1, 2))
        self.faces = _frozen(np.asarray(faces, dtype=np.int64).reshape(-1, 2))
        self.owner = _frozen(np.asarray(owner, dtype=np.int64).ravel())
        self.neighbour = _frozen(np.asarray(neighbour, dtype=np.int64).ravel())
        self.patches: tuple[Patch, ...] = tuple(patches)
        self._check_topology()
        self._compute_geometry()
        self._check_geometry()

    # Sizes ------------------------------------------------------------------

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def n_internal(self) -> int:
        return len(self.neighbour)

    @property
    def n_boundary(self) -> int:
        return self.n_faces - self.n_internal

    @property
    def n_cells(self) -> int:
        return self._n_cells

    @property
    def boundary(self) -> slice:
        return slice(self.n_internal, self.n_faces)

    @property
    def patch_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.patches)

    def patch(self, name: str) -> Patch:
        for patch in self.patches:
            if patch.name == name:
                return patch
        raise KeyError(f"mesh has no patch named '{name}'")

    def has_patch(self, name: str) -> bool:
        return name in self.patch_names

    # Derived geometry -------------------------------------------------------

    @property
    def total_area(self) -> float:
        return float(self.cell_volumes.sum())

    @cached_property
    def cell_sizes(self) -> np.ndarray:
        return np.sqrt(self.cell_volumes)

    @property
    def h_min(self) -> float:
        return float(self.cell_sizes.min())

    @property
    def h_max(self) -> float:
        return float(self.cell_sizes.max())

    @cached_property
    def face_normals(self) -> np.ndarray:
        return self.face_areas / self.face_mag[:, None]

    @cached_property
    def deltas(self) -> np.ndarray:
        """Owner-to-neighbour centre vector; owner-to-face-centre on the boundary."""

        d = self.face_centres - self.cell_centres[self.owner]
        n = self.n_internal
        d[:n] = self.cell_centres[self.neighbour] - self.cell_centres[self.owner[:n]]
        return _frozen(d)

    @cached_property
    def weights(self) -> np.ndarray:
        """Central interpolation weight of the owner value on internal faces."""

        n = self.n_internal
        normals = self.face_normals[:n]
        d_own = np.abs(np.einsum("ij,ij->i", normals, self.face_centres[:n] - self.cell_centres[self.owner[:n]]))
        d_nei = np.abs(np.einsum("ij,ij->i", normals, self.cell_centres[self.neighbour] - self.face_centres[:n]))
        return _frozen(d_nei / (d_own + d_nei))

    @cached_property
    def delta_coeffs(self) -> np.ndarray:
        """Over-relaxed orthogonal coefficient ``(A.A)/(d.A)`` per face."""

        a = self.face_areas
        return _frozen(np.einsum("ij,ij->i", a, a) / np.einsum("ij,ij->i", self.deltas, a))

    @cached_property
    def non_orthogonal_vectors(self) -> np.ndarray:
        """``k = A - d (A.A)/(d.A)``; zero on orthogonal faces."""

        return _frozen(self.face_areas - self.deltas * self.delta_coeffs[:, None])

    @cached_property
    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for array in (self.points, self.faces, self.owner, self.neighbour):
            digest.update(np.ascontiguousarray(array).astype("<f8" if array.dtype.kind == "f" else "<i8").tobytes())
        for patch in self.patches:
            digest.update(f"{patch.name}:{patch.start}:{patch.size};".encode())
        return digest.hexdigest()

    def closure_residual(self) -> np.ndarray:
        """Norm of the summed outward area vectors per cell."""

        total = np.zeros((self.n_cells, 2))
        np.add.at(total, self.owner, self.face_areas)
        np.subtract.at(total, self.neighbour, self.face_areas[: self.n_internal])
        return np.hypot(total[:, 0], total[:, 1])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mesh):
            return NotImplemented
        return (
            self.patches == other.patches
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.faces, other.faces)
            and np.array_equal(self.owner, other.owner)
            and np.array_equal(self.neighbour, other.neighbour)
        )

    __hash__ = object.__hash__

    def __repr__(self) -> str:
        return f"Mesh(cells={self.n_cells}, faces={self.n_faces}, patches={list(self.patch_names)})"

    # Internals --------------------------------------------------------------

    def _check_topology(self) -> None:
        n_faces, n_internal = len(self.faces), len(self.neighbour)
        if len(self.owner) != n_faces:
            raise MeshValidationError("owner array length differs from face count")
        if n_internal > n_faces:
            raise MeshValidationError("more neighbours than faces")
        if n_faces == 0:
            raise MeshValidationError("mesh has no faces")
        if self.faces.min() < 0 or self.faces.max() >= len(self.points):
            raise MeshValidationError("face references a missing vertex")
        if self.owner.min() < 0 or (n_internal and self.neighbour.min() < 0):
            raise MeshValidationError("negative cell index")
        if n_internal and np.any(self.owner[:n_internal] == self.neighbour):
            raise MeshValidationError("internal face with identical owner and neighbour")

        cursor = n_internal
        for patch in self.patches:
            if patch.start != cursor or patch.size < 0:
                raise MeshValidationError(f"patch '{patch.name}' is not contiguous after face {cursor}")
            cursor += patch.size
        if cursor != n_faces:
            raise MeshValidationError("patches do not cover all boundary faces")
        if len(set(self.patch_names)) != len(self.patches):
            raise MeshValidationError("duplicate patch names")

        self._n_cells = int(max(self.owner.max(), self.neighbour.max() if n_internal else -1)) + 1
        seen = np.zeros(self._n_cells, dtype=bool)
        seen[self.owner] = True
        seen[self.neighbour] = True
        if not seen.all():
            raise MeshValidationError("cell without faces")

    def _compute_geometry(self) -> None:
        a = self.points[self.faces[:, 0]]
        b = self.points[self.faces[:, 1]]
        edge = b - a
        self.face_centres = _frozen(0.5 * (a + b))
        self.face_areas = _frozen(np.column_stack([edge[:, 1], -edge[:, 0]]))
        self.face_mag = _frozen(np.hypot(edge[:, 0], edge[:, 1]))

        n, nc = self.n_internal, self._n_cells
        nb = self.neighbour
        counts = np.bincount(self.owner, minlength=nc) + np.bincount(nb, minlength=nc)
        guess = np.zeros((nc, 2))
        np.add.at(guess, self.owner, self.face_centres)
        np.add.at(guess, nb, self.face_centres[:n])
        guess /= counts[:, None]

        # Owner sees a -> b counter-clockwise, the neighbour sees b -> a.
        c_own = guess[self.owner]
        area_own = 0.5 * cross2(a - c_own, b - c_own)
        c_nei = guess[nb]
        area_nei = 0.5 * cross2(b[:n] - c_nei, a[:n] - c_nei)

        volumes = np.bincount(self.owner, area_own, minlength=nc) + np.bincount(nb, area_nei, minlength=nc)
        moment = np.zeros((nc, 2))
        np.add.at(moment, self.owner, area_own[:, None] * (c_own + a + b) / 3.0)
        np.add.at(moment, nb, area_nei[:, None] * (c_nei + a[:n] + b[:n]) / 3.0)

        self.cell_volumes = _frozen(volumes)
        with np.errstate(divide="ignore", invalid="ignore"):
            self.cell_centres = _frozen(moment / volumes[:, None])

    def _check_geometry(self) -> None:
        bad = np.flatnonzero(~(self.cell_volumes > 0.0))
        if bad.size:
            raise MeshValidationError(f"{bad.size} cells with non-positive area (first: cell {bad[0]})")
        if np.any(self.face_mag <= 0.0):
            raise MeshValidationError("degenerate face of zero length")
        perimeter = np.bincount(self.owner, self.face_mag, minlength=self.n_cells)
        perimeter += np.bincount(self.neighbour, self.face_mag[: self.n_internal], minlength=self.n_cells)
        open_cells = np.flatnonzero(self.closure_residual() > 1e-12 * np.maximum(perimeter, 1.0))
        if open_cells.size:
            raise MeshValidationError(f"cell {open_cells[0]} is not closed by its faces")


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


def build_mesh(
    points: np.ndarray,
    cells: Iterable[Sequence[int]],
    classify: Callable[[np.ndarray], str],
    patch_order: Sequence[str],
) -> Mesh:
    """Build a :class:`Mesh` from polygon vertex loops.

    ``classify`` maps a boundary face centre to its patch name.  Loops may be
    given in either orientation.
    """

    points = np.asarray(points, dtype=np.float64)
    loops: list[list[int]] = []
    for loop in cells:
        loop = [int(v) for v in loop]
        xy = points[loop]
        signed = 0.5 * np.sum(xy[:, 0] * np.roll(xy[:, 1], -1) - np.roll(xy[:, 0], -1) * xy[:, 1])
        if signed == 0.0:
            raise MeshGenerationError(f"degenerate cell {len(loops)}")
        loops.append(loop if signed > 0 else loop[::-1])

    open_edges: dict[tuple[int, int], tuple[int, int, int]] = {}
    internal: list[tuple[int, int, int, int]] = []
    for cell, loop in enumerate(loops):
        for a, b in zip(loop, loop[1:] + loop[:1]):
            key = (a, b) if a < b else (b, a)
            first = open_edges.pop(key, None)
            if first is None:
                open_edges[key] = (cell, a, b)
            else:
                owner, fa, fb = first
                if owner == cell:
                    raise MeshGenerationError(f"cell {cell} uses edge {key} twice")
                internal.append((owner, cell, fa, fb))
    internal.sort(key=lambda row: (row[0], row[1]))

    grouped: dict[str, list[tuple[int, int, int]]] = {name: [] for name in patch_order}
    for cell, a, b in sorted(open_edges.values()):
        name = classify(0.5 * (points[a] + points[b]))
        if name not in grouped:
            raise MeshGenerationError(f"boundary face classified into unknown patch '{name}'")
        grouped[name].append((cell, a, b))

    faces = [(a, b) for _, _, a, b in internal]
    owner = [o for o, _, _, _ in internal]
    neighbour = [n for _, n, _, _ in internal]
    patches = []
    for name in patch_order:
        patches.append(Patch(name, len(faces), len(grouped[name])))
        for cell, a, b in grouped[name]:
            faces.append((a, b))
            owner.append(cell)

    return Mesh(points, np.array(faces, dtype=np.int64), np.array(owner), np.array(neighbour, dtype=np.int64), patches)
