"""Plain-text mesh format (see ``docs/mesh_format.md``)."""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

import numpy as np

from lerayrom.exceptions import MeshFormatError

from .geometry import Mesh, Patch

__all__ = ["FORMAT_TAG", "FORMAT_VERSION", "load_mesh", "save_mesh"]

FORMAT_TAG = "lerayrom-mesh"
FORMAT_VERSION = 1


def save_mesh(mesh: Mesh, path: str | Path) -> Path:
    path = Path(path)
    patch_of = np.empty(mesh.n_boundary, dtype=object)
    for patch in mesh.patches:
        patch_of[patch.start - mesh.n_internal : patch.start - mesh.n_internal + patch.size] = patch.name

    lines = [f"{FORMAT_TAG} {FORMAT_VERSION}", f"points {mesh.n_points}"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in mesh.points]
    lines.append(f"faces {mesh.n_faces} {mesh.n_internal}")
    for f in range(mesh.n_faces):
        v0, v1 = mesh.faces[f]
        other = mesh.neighbour[f] if f < mesh.n_internal else patch_of[f - mesh.n_internal]
        lines.append(f"{v0} {v1} {mesh.owner[f]} {other}")
    lines.append(f"patches {len(mesh.patches)}")
    lines += [f"{p.name} {p.start} {p.size}" for p in mesh.patches]

    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


class _Reader:
    def __init__(self, text: str):
        self._lines = text.splitlines()
        self.lineno = 0

    def __iter__(self) -> Iterator[list[str]]:
        return self

    def __next__(self) -> list[str]:
        while self.lineno < len(self._lines):
            self.lineno += 1
            tokens = self._lines[self.lineno - 1].split()
            if tokens and not tokens[0].startswith("#"):
                return tokens
        raise MeshFormatError("unexpected end of file", self.lineno + 1)

    def section(self, keyword: str, arity: int) -> list[int]:
        tokens = next(self)
        if tokens[0] != keyword or len(tokens) != arity + 1:
            raise MeshFormatError(f"expected '{keyword}' header with {arity} count(s)", self.lineno)
        return [self.integer(t) for t in tokens[1:]]

    def integer(self, token: str) -> int:
        try:
            value = int(token)
        except ValueError:
            raise MeshFormatError(f"expected an integer, got '{token}'", self.lineno) from None
        if value < 0:
            raise MeshFormatError(f"negative count or index '{token}'", self.lineno)
        return value

    def real(self, token: str) -> float:
        try:
            return float(token)
        except ValueError:
            raise MeshFormatError(f"expected a number, got '{token}'", self.lineno) from None


def load_mesh(path: str | Path) -> Mesh:
    """Parse a mesh file; structural problems raise ``MeshFormatError``."""

    reader = _Reader(Path(path).read_text(encoding="utf-8"))
    header = next(reader)
    if len(header) != 2 or header[0] != FORMAT_TAG:
        raise MeshFormatError(f"missing '{FORMAT_TAG}' header", reader.lineno)
    if header[1] != str(FORMAT_VERSION):
        raise MeshFormatError(f"unsupported mesh format version {header[1]}", reader.lineno)

    (n_points,) = reader.section("points", 1)
    points = np.empty((n_points, 2))
    for i in range(n_points):
        tokens = next(reader)
        if len(tokens) != 2:
            raise MeshFormatError("point line needs two coordinates", reader.lineno)
        points[i] = reader.real(tokens[0]), reader.real(tokens[1])

    n_faces, n_internal = reader.section("faces", 2)
    if n_internal > n_faces:
        raise MeshFormatError("more internal faces than faces", reader.lineno)
    faces = np.empty((n_faces, 2), dtype=np.int64)
    owner = np.empty(n_faces, dtype=np.int64)
    neighbour = np.empty(n_internal, dtype=np.int64)
    face_patch: list[str] = []
    for f in range(n_faces):
        tokens = next(reader)
        if len(tokens) != 4:
            raise MeshFormatError("face line needs 'v0 v1 owner neighbour|patch'", reader.lineno)
        v0, v1, own = (reader.integer(t) for t in tokens[:3])
        if max(v0, v1) >= n_points:
            raise MeshFormatError(f"face references vertex beyond {n_points - 1}", reader.lineno)
        faces[f] = v0, v1
        owner[f] = own
        if f < n_internal:
            neighbour[f] = reader.integer(tokens[3])
        else:
            face_patch.append(tokens[3])

    (n_patches,) = reader.section("patches", 1)
    patches = []
    for _ in range(n_patches):
        tokens = next(reader)
        if len(tokens) != 3:
            raise MeshFormatError("patch line needs 'name start size'", reader.lineno)
        start, size = reader.integer(tokens[1]), reader.integer(tokens[2])
        labels = set(face_patch[start - n_internal : start - n_internal + size])
        if start < n_internal or labels - {tokens[0]}:
            raise MeshFormatError(f"patch '{tokens[0]}' disagrees with the face table", reader.lineno)
        patches.append(Patch(tokens[0], start, size))

    return Mesh(points, faces, owner, neighbour, patches)
