"""Mesh quality metrics in the OpenFOAM ``checkMesh`` spirit."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .geometry import Mesh

__all__ = ["QualityReport", "quality"]


@dataclass(frozen=True)
class QualityReport:
    n_cells: int
    max_non_orthogonality: float
    avg_non_orthogonality: float
    max_skewness: float
    avg_skewness: float
    max_aspect_ratio: float
    h_min: float
    h_max: float

    def as_dict(self) -> dict:
        return asdict(self)


def quality(mesh: Mesh) -> QualityReport:
    n = mesh.n_internal
    d = mesh.deltas[:n]
    a = mesh.face_areas[:n]
    d_mag = np.hypot(d[:, 0], d[:, 1])
    cosine = np.einsum("ij,ij->i", d, a) / (d_mag * mesh.face_mag[:n])
    angles = np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0)))

    # Distance from the face centre to where the centre-to-centre line crosses the face.
    owner_centres = mesh.cell_centres[mesh.owner[:n]]
    normals = mesh.face_normals[:n]
    along = np.einsum("ij,ij->i", mesh.face_centres[:n] - owner_centres, normals) / np.einsum("ij,ij->i", d, normals)
    crossing = owner_centres + along[:, None] * d
    skew = np.hypot(*(mesh.face_centres[:n] - crossing).T) / d_mag

    longest = np.zeros(mesh.n_cells)
    shortest = np.full(mesh.n_cells, np.inf)
    for cells, lengths in ((mesh.owner, mesh.face_mag), (mesh.neighbour, mesh.face_mag[:n])):
        np.maximum.at(longest, cells, lengths)
        np.minimum.at(shortest, cells, lengths)

    return QualityReport(
        n_cells=mesh.n_cells,
        max_non_orthogonality=float(angles.max()) if n else 0.0,
        avg_non_orthogonality=float(angles.mean()) if n else 0.0,
        max_skewness=float(skew.max()) if n else 0.0,
        avg_skewness=float(skew.mean()) if n else 0.0,
        max_aspect_ratio=float((longest / shortest).max()),
        h_min=mesh.h_min,
        h_max=mesh.h_max,
    )
