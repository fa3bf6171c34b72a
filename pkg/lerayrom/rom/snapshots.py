"""Snapshot matrices, the inlet lifting and the binary snapshot format.

Vector fields are stored flattened cell by cell, ``[u0x, u0y, u1x, ...]``, so
a snapshot matrix has ``n_cells * ncomp`` rows and one column per time.

File layout (all little-endian)::

    magic "LRSNAP\\0\\0" | u32 version | u16 name length | u64 rows | u64 cols
    | u8 ncomp | u8 flags | name (utf-8) | rows*cols f8, column-major
    | cols f8 time stamps | 64 ascii bytes mesh fingerprint
"""

from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from lerayrom.exceptions import (
    ContractViolation,
    FingerprintError,
    MissingArtifactError,
    NumericalError,
    SnapshotFormatError,
)
from lerayrom.fom.physics import FlowBoundaries, InletLaw, SolverSettings
from lerayrom.fom.stepper import GeneralizedStokesSolver
from lerayrom.fv import Field, incidence
from lerayrom.mesh import Mesh

logger = logging.getLogger(__name__)

__all__ = [
    "FORMAT_VERSION",
    "LiftingFunction",
    "SnapshotMatrix",
    "SnapshotSet",
    "build_lifting",
    "dehomogenize",
    "dof_weights",
    "homogenize",
    "l2_inner",
    "load_snapshots",
    "save_snapshots",
]

MAGIC = b"LRSNAP\0\0"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIHQQBB")
_FINGERPRINT_BYTES = 64
_DATA = np.dtype("<f8")

VELOCITY_FIELDS = ("v", "u")
PRESSURE_FIELDS = ("q", "q_bar")


def dof_weights(volumes: np.ndarray, ncomp: int) -> np.ndarray:
    """Cell volumes repeated per component, matching the flattened layout."""

    return np.repeat(np.asarray(volumes, dtype=np.float64), ncomp)


def l2_inner(a: np.ndarray, b: np.ndarray, weights: np.ndarray) -> float:
    """``sum_cells area * a . b`` for scalar or vector cell fields."""

    weights = np.asarray(weights, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.size % weights.size:
        raise ContractViolation(f"fields {a.shape} and {b.shape} do not live on a mesh of {weights.size} cells")
    a = a.reshape(weights.size, -1)
    b = b.reshape(weights.size, -1)
    return float(np.sum(weights[:, None] * a * b))


@dataclass(frozen=True)
class SnapshotMatrix:
    """Columns of one field at the time stamps ``times``."""

    name: str
    values: np.ndarray
    times: np.ndarray
    fingerprint: str
    ncomp: int = 1

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        times = np.asarray(self.times, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != times.shape[0]:
            raise ContractViolation(f"{self.name}: {values.shape} matrix does not match {times.shape[0]} time stamps")
        if self.ncomp not in (1, 2) or values.shape[0] % self.ncomp:
            raise ContractViolation(f"{self.name}: invalid component count {self.ncomp}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "times", times)

    @classmethod
    def from_fields(cls, name: str, fields: np.ndarray, times: Sequence[float], fingerprint: str) -> "SnapshotMatrix":
        """Stack ``(n_snapshots, n_cells[, 2])`` field values as columns."""

        fields = np.asarray(fields, dtype=np.float64)
        ncomp = 2 if fields.ndim == 3 else 1
        values = fields.reshape(fields.shape[0], -1).T if fields.shape[0] else np.zeros((0, 0))
        return cls(name, values, np.asarray(times, dtype=np.float64), fingerprint, ncomp)

    @property
    def n_dofs(self) -> int:
        return self.values.shape[0]

    @property
    def n_cells(self) -> int:
        return self.values.shape[0] // self.ncomp

    @property
    def n_snapshots(self) -> int:
        return self.values.shape[1]

    def field(self, k: int) -> np.ndarray:
        column = self.values[:, k]
        return column.reshape(self.n_cells, 2) if self.ncomp == 2 else column.copy()

    def fields(self) -> np.ndarray:
        shape = (self.n_snapshots, self.n_cells) + ((2,) if self.ncomp == 2 else ())
        return self.values.T.reshape(shape)

    def with_values(self, values: np.ndarray, name: str | None = None) -> "SnapshotMatrix":
        return SnapshotMatrix(name or self.name, values, self.times, self.fingerprint, self.ncomp)

    def check_mesh(self, mesh: Mesh) -> None:
        if self.fingerprint != mesh.fingerprint:
            raise FingerprintError(mesh.fingerprint, self.fingerprint, f"snapshots '{self.name}'")


class SnapshotSet(Mapping):
    """Snapshot matrices of one run, sharing times, mesh and L2 weights."""

    def __init__(self, matrices: Mapping[str, SnapshotMatrix], volumes: np.ndarray):
        self._matrices = dict(matrices)
        self.volumes = np.asarray(volumes, dtype=np.float64)
        if not self._matrices:
            raise ContractViolation("a snapshot set needs at least one field")
        first = next(iter(self._matrices.values()))
        for m in self._matrices.values():
            if m.n_snapshots != first.n_snapshots or not np.array_equal(m.times, first.times):
                raise ContractViolation(f"'{m.name}' has a different snapshot schedule than '{first.name}'")
            if m.fingerprint != first.fingerprint:
                raise FingerprintError(first.fingerprint, m.fingerprint, f"snapshots '{m.name}'")
            if m.n_cells != self.volumes.size:
                raise ContractViolation(f"'{m.name}' has {m.n_cells} cells, weights have {self.volumes.size}")
        self.times = first.times
        self.fingerprint = first.fingerprint

    def __getitem__(self, name: str) -> SnapshotMatrix:
        return self._matrices[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._matrices)

    def __len__(self) -> int:
        return len(self._matrices)

    @property
    def n_snapshots(self) -> int:
        return self.times.size

    def weights(self, name: str) -> np.ndarray:
        return dof_weights(self.volumes, self._matrices[name].ncomp)

    def save(self, directory: str | os.PathLike) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        return [save_snapshots(m, directory / f"{name}.lrsnap") for name, m in self._matrices.items()]

    @classmethod
    def load(cls, directory: str | os.PathLike, names: Sequence[str], mesh: Mesh) -> "SnapshotSet":
        directory = Path(directory)
        matrices = {name: load_snapshots(directory / f"{name}.lrsnap") for name in names}
        for m in matrices.values():
            m.check_mesh(mesh)
        return cls(matrices, mesh.cell_volumes)


# Binary format ---------------------------------------------------------------

def save_snapshots(matrix: SnapshotMatrix, path: str | os.PathLike) -> Path:
    path = Path(path)
    name = matrix.name.encode("utf-8")
    fingerprint = matrix.fingerprint.encode("ascii")
    if len(fingerprint) != _FINGERPRINT_BYTES:
        raise ContractViolation("mesh fingerprint must be a 64-character hex digest")
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, len(name), matrix.n_dofs, matrix.n_snapshots, matrix.ncomp, 0)
    payload = b"".join(
        [
            header,
            name,
            np.asarray(matrix.values, dtype=_DATA).tobytes(order="F"),
            np.asarray(matrix.times, dtype=_DATA).tobytes(),
            fingerprint,
        ]
    )
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)
    return path


def load_snapshots(path: str | os.PathLike) -> SnapshotMatrix:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise SnapshotFormatError(f"{path}: truncated header")
    magic, version, name_len, rows, cols, ncomp, _flags = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"{path}: not a snapshot file")
    if version != FORMAT_VERSION:
        raise SnapshotFormatError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    offset = _HEADER.size
    expected = offset + name_len + 8 * rows * cols + 8 * cols + _FINGERPRINT_BYTES
    if len(data) != expected:
        raise SnapshotFormatError(f"{path}: {len(data)} bytes, header announces {expected}")
    try:
        name = data[offset : offset + name_len].decode("utf-8")
        fingerprint = data[expected - _FINGERPRINT_BYTES :].decode("ascii")
    except UnicodeDecodeError as exc:
        raise SnapshotFormatError(f"{path}: corrupted name or fingerprint") from exc
    offset += name_len
    values = np.frombuffer(data, dtype=_DATA, count=rows * cols, offset=offset)
    values = values.reshape((rows, cols), order="F").astype(np.float64)
    offset += 8 * rows * cols
    times = np.frombuffer(data, dtype=_DATA, count=cols, offset=offset).astype(np.float64)
    try:
        return SnapshotMatrix(name, values, times, fingerprint, ncomp)
    except ContractViolation as exc:
        raise SnapshotFormatError(f"{path}: {exc}") from exc


# Lifting ---------------------------------------------------------------------

@dataclass(frozen=True)
class LiftingFunction:
    """Divergence-free ``chi`` carrying the inlet profile with unit coefficient."""

    values: np.ndarray
    law: InletLaw
    fingerprint: str
    divergence: float = 0.0
    flux: np.ndarray | None = field(default=None, repr=False, compare=False)

    def v_bc(self, t: float) -> float:
        return self.law.coefficient(t)

    u_bc = v_bc

    def as_field(self, mesh: Mesh, boundaries: FlowBoundaries) -> Field:
        if mesh.fingerprint != self.fingerprint:
            raise FingerprintError(mesh.fingerprint, self.fingerprint, "lifting")
        return Field(mesh, self.values, boundaries.lifting_velocity(), "chi")

    def as_snapshots(self) -> SnapshotMatrix:
        return SnapshotMatrix.from_fields("chi", self.values[None], [0.0], self.fingerprint)

    @classmethod
    def from_snapshots(cls, matrix: SnapshotMatrix, law: InletLaw) -> "LiftingFunction":
        if matrix.n_snapshots != 1 or matrix.ncomp != 2:
            raise SnapshotFormatError("lifting file must hold one vector field")
        return cls(matrix.field(0), law, matrix.fingerprint)


def build_lifting(
    mesh: Mesh,
    boundaries: FlowBoundaries,
    settings: SolverSettings | None = None,
    pseudo_steps: int = 10,
    tolerance: float = 1e-8,
) -> LiftingFunction:
    """Extend the inlet profile into the domain by pseudo-time Stokes steps.

    Each step solves ``chi - lap(chi) + grad(p) = chi_old`` with ``div(chi) = 0``
    and the lifting boundary data, until the update stalls.
    """

    settings = settings or SolverSettings(simplec_max_iterations=200, simplec_tolerance=1e-10)
    boundaries.check(mesh)
    solver = GeneralizedStokesSolver(
        mesh, 1.0, 1.0, boundaries.lifting_velocity(), boundaries.pressure(), settings, label="lifting"
    )
    chi = np.zeros((mesh.n_cells, 2))
    pressure = None
    solution = None
    for step in range(1, pseudo_steps + 1):
        solution = solver.solve(chi, 0.0, pressure)
        change = float(np.abs(solution.velocity - chi).max()) / max(float(np.abs(solution.velocity).max()), 1e-300)
        chi, pressure = solution.velocity, solution.pressure
        if change < 1e-6:
            break
    logger.info("lifting built in %d pseudo-steps", step)

    divergence = float(np.abs(incidence(mesh) @ solution.flux).max())
    if divergence > tolerance:
        raise NumericalError(f"lifting is not divergence-free (max cell net flux {divergence:.3e})")
    return LiftingFunction(chi, boundaries.inlet_law, mesh.fingerprint, divergence, solution.flux)


def _check_lifting(matrix: SnapshotMatrix, lifting: LiftingFunction) -> None:
    if matrix.fingerprint != lifting.fingerprint:
        raise FingerprintError(lifting.fingerprint, matrix.fingerprint, f"homogenizing '{matrix.name}'")
    if matrix.ncomp != 2:
        raise ContractViolation(f"'{matrix.name}' is not a velocity field")


def homogenize(matrix: SnapshotMatrix, lifting: LiftingFunction) -> SnapshotMatrix:
    """Subtract ``v_bc(t) chi`` from every column."""

    _check_lifting(matrix, lifting)
    coefficients = np.array([lifting.v_bc(t) for t in matrix.times])
    return matrix.with_values(matrix.values - np.outer(lifting.values.ravel(), coefficients))


def dehomogenize(matrix: SnapshotMatrix, lifting: LiftingFunction) -> SnapshotMatrix:
    _check_lifting(matrix, lifting)
    coefficients = np.array([lifting.v_bc(t) for t in matrix.times])
    return matrix.with_values(matrix.values + np.outer(lifting.values.ravel(), coefficients))
