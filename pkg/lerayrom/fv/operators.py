"""Collocated finite-volume operators.

Implicit operators are returned as :class:`SparseOperator` and are *integrated*
over the cell: ``apply(phi)`` is the cell integral of the continuous operator,
so dividing by the cell area gives the point value.  Explicit operators
(gradient, divergence) return per-area values.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse

from lerayrom.exceptions import ContractViolation, SingularCouplingError
from lerayrom.mesh import Mesh

from .fields import BCKind, BoundarySet, Field, boundary_normal_distance

__all__ = [
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
]


@dataclass(frozen=True)
class SparseOperator:
    """``matrix @ values + source``; ``source`` has one column per component."""

    matrix: sparse.csr_matrix
    source: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        cols = values.reshape(values.shape[0], -1)
        out = self.matrix @ cols + self.source
        return out.reshape(values.shape) if out.shape[1] == cols.shape[1] else out

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def off_diagonal(self) -> sparse.csr_matrix:
        return (self.matrix - sparse.diags(self.matrix.diagonal())).tocsr()

    def __add__(self, other: "SparseOperator") -> "SparseOperator":
        return SparseOperator((self.matrix + other.matrix).tocsr(), self.source + other.source)

    def __sub__(self, other: "SparseOperator") -> "SparseOperator":
        return SparseOperator((self.matrix - other.matrix).tocsr(), self.source - other.source)

    def __neg__(self) -> "SparseOperator":
        return SparseOperator(-self.matrix, -self.source)

    def __mul__(self, scale: float) -> "SparseOperator":
        return SparseOperator((self.matrix * scale).tocsr(), self.source * scale)

    __rmul__ = __mul__


@lru_cache(maxsize=16)
def incidence(mesh: Mesh) -> sparse.csr_matrix:
    """Cell-by-face matrix summing owner-outward face quantities per cell."""

    n = mesh.n_internal
    rows = np.concatenate([mesh.owner, mesh.neighbour])
    cols = np.concatenate([np.arange(mesh.n_faces), np.arange(n)])
    data = np.concatenate([np.ones(mesh.n_faces), -np.ones(n)])
    return sparse.csr_matrix((data, (rows, cols)), shape=(mesh.n_cells, mesh.n_faces))


def mass_operator(mesh: Mesh, coeff: float, ncomp: int = 1) -> SparseOperator:
    return SparseOperator(sparse.diags(coeff * mesh.cell_volumes).tocsr(), np.zeros((mesh.n_cells, ncomp)))


def interpolate_cells(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Central interpolation of raw cell values; boundary faces take the owner value."""

    values = np.asarray(values, dtype=np.float64)
    n = mesh.n_internal
    w = mesh.weights.reshape((-1,) + (1,) * (values.ndim - 1))
    out = np.empty((mesh.n_faces,) + values.shape[1:])
    out[:n] = w * values[mesh.owner[:n]] + (1.0 - w) * values[mesh.neighbour]
    out[n:] = values[mesh.owner[n:]]
    return out


def face_interp_central(field: Field) -> np.ndarray:
    """Face values ``(n_faces, ncomp)``: weighted average inside, BC value outside."""

    mesh = field.mesh
    n = mesh.n_internal
    out = np.empty((mesh.n_faces, field.ncomp))
    w = mesh.weights[:, None]
    cols = field.columns
    out[:n] = w * cols[mesh.owner[:n]] + (1.0 - w) * cols[mesh.neighbour]
    out[n:] = field.boundary_values()
    return out


def face_flux(field: Field) -> np.ndarray:
    """Interpolated velocity dotted with the face area vector."""

    return np.einsum("ij,ij->i", face_interp_central(field), field.mesh.face_areas)


def gauss_gradient(field: Field) -> np.ndarray:
    """Green-Gauss gradient: ``(n_cells, 2)`` for scalars, ``(n_cells, 2, 2)`` for vectors.

    For vectors ``grad[c, i, j]`` is the derivative of component ``i`` along ``j``.
    """

    mesh = field.mesh
    faces = face_interp_central(field)
    contrib = faces[:, :, None] * mesh.face_areas[:, None, :]
    summed = incidence(mesh) @ contrib.reshape(mesh.n_faces, -1)
    grad = summed.reshape(mesh.n_cells, field.ncomp, 2) / mesh.cell_volumes[:, None, None]
    return grad if field.is_vector else grad[:, 0, :]


def gauss_divergence(field: Field) -> np.ndarray:
    if not field.is_vector:
        raise ContractViolation("divergence needs a vector field")
    return (incidence(field.mesh) @ face_flux(field)) / field.mesh.cell_volumes


def _face_coefficient(mesh: Mesh, coeff) -> np.ndarray:
    coeff = np.asarray(coeff, dtype=np.float64)
    if coeff.ndim == 0:
        gamma = np.full(mesh.n_faces, float(coeff))
    elif coeff.shape == (mesh.n_faces,):
        gamma = coeff
    elif coeff.shape == (mesh.n_cells,):
        gamma = interpolate_cells(mesh, coeff)
    else:
        raise ContractViolation(f"diffusivity of shape {coeff.shape} matches neither faces nor cells")
    if np.any(gamma < 0.0) or not np.all(np.isfinite(gamma)):
        raise ContractViolation("diffusivity must be finite and non-negative")
    return gamma


def laplacian_matrix(
    mesh: Mesh, coeff, boundary: BoundarySet, t: float = 0.0, ncomp: int = 1
) -> SparseOperator:
    """Orthogonal part of ``div(coeff grad(.))`` with boundary contributions."""

    boundary.check(mesh)
    n = mesh.n_internal
    gamma = _face_coefficient(mesh, coeff)
    c = gamma * mesh.delta_coeffs
    own, nei = mesh.owner[:n], mesh.neighbour

    kinds = boundary.kinds(mesh)
    prescribed = boundary.values(mesh, t, ncomp)
    fixed = kinds == BCKind.FIXED_VALUE
    cb = c[n:]
    b_cells = mesh.owner[n:]

    rows = np.concatenate([own, nei, own, nei, b_cells[fixed]])
    cols = np.concatenate([own, nei, nei, own, b_cells[fixed]])
    data = np.concatenate([-c[:n], -c[:n], c[:n], c[:n], -cb[fixed]])
    matrix = sparse.csr_matrix((data, (rows, cols)), shape=(mesh.n_cells, mesh.n_cells))

    face_source = np.zeros((mesh.n_boundary, ncomp))
    face_source[fixed] = cb[fixed, None] * prescribed[fixed]
    graded = kinds == BCKind.FIXED_GRADIENT
    face_source[graded] = (gamma[n:] * mesh.face_mag[n:])[graded, None] * prescribed[graded]
    source = np.zeros((mesh.n_cells, ncomp))
    np.add.at(source, b_cells, face_source)
    return SparseOperator(matrix, source)


def _internal_correction(field: Field, gamma: np.ndarray) -> np.ndarray:
    """``gamma k . grad(field)`` on internal faces, shape ``(n_internal, ncomp)``."""

    mesh = field.mesh
    n = mesh.n_internal
    grad = gauss_gradient(field).reshape(mesh.n_cells, field.ncomp, 2)
    w = mesh.weights[:, None, None]
    face_grad = w * grad[mesh.owner[:n]] + (1.0 - w) * grad[mesh.neighbour]
    k = mesh.non_orthogonal_vectors[:n]
    return gamma[:n, None] * np.einsum("fcj,fj->fc", face_grad, k)


def non_orthogonal_source(field: Field, coeff) -> np.ndarray:
    """Explicit non-orthogonal correction evaluated from ``field``."""

    mesh = field.mesh
    corr = _internal_correction(field, _face_coefficient(mesh, coeff))
    n = mesh.n_internal
    source = np.zeros((mesh.n_cells, field.ncomp))
    np.add.at(source, mesh.owner[:n], corr)
    np.subtract.at(source, mesh.neighbour, corr)
    return source


def laplacian(field: Field, coeff=1.0, correct: bool = True) -> SparseOperator:
    """Over-relaxed Laplacian: implicit orthogonal part, explicit correction from ``field``."""

    op = laplacian_matrix(field.mesh, coeff, field.boundary, field.time, field.ncomp)
    if not correct:
        return op
    return SparseOperator(op.matrix, op.source + non_orthogonal_source(field, coeff))


def laplacian_flux(field: Field, coeff=1.0, correction: Field | None = None) -> np.ndarray:
    """Face fluxes ``coeff * grad(field) . A`` consistent with :func:`laplacian`.

    The non-orthogonal part is evaluated from ``correction`` (``field`` itself
    when omitted), matching the explicit source the equation was solved with.
    """

    mesh = field.mesh
    n = mesh.n_internal
    gamma = _face_coefficient(mesh, coeff)
    c = gamma * mesh.delta_coeffs
    cols = field.columns
    flux = np.zeros((mesh.n_faces, field.ncomp))
    flux[:n] = c[:n, None] * (cols[mesh.neighbour] - cols[mesh.owner[:n]])
    flux[:n] += _internal_correction(correction if correction is not None else field, gamma)

    kinds = field.boundary.kinds(mesh)
    prescribed = field.boundary.values(mesh, field.time, field.ncomp)
    owner_values = cols[mesh.owner[n:]]
    fixed = kinds == BCKind.FIXED_VALUE
    graded = kinds == BCKind.FIXED_GRADIENT
    flux[n:][fixed] = c[n:][fixed, None] * (prescribed[fixed] - owner_values[fixed])
    flux[n:][graded] = (gamma[n:] * mesh.face_mag[n:])[graded, None] * prescribed[graded]
    return flux if field.is_vector else flux[:, 0]


def convective_operator(flux: np.ndarray, field: Field) -> SparseOperator:
    """Central-differenced ``div(flux field)`` for the transported ``field``."""

    mesh = field.mesh
    flux = np.asarray(flux, dtype=np.float64)
    if flux.shape != (mesh.n_faces,):
        raise ContractViolation(f"flux must have one value per face ({mesh.n_faces})")
    n = mesh.n_internal
    own, nei = mesh.owner[:n], mesh.neighbour
    w = mesh.weights
    fi = flux[:n]

    kinds = field.boundary.kinds(mesh)
    prescribed = field.boundary.values(mesh, field.time, field.ncomp)
    fb = flux[n:]
    b_cells = mesh.owner[n:]
    implicit = kinds != BCKind.FIXED_VALUE

    rows = np.concatenate([own, own, nei, nei, b_cells[implicit]])
    cols = np.concatenate([own, nei, own, nei, b_cells[implicit]])
    data = np.concatenate([fi * w, fi * (1.0 - w), -fi * w, -fi * (1.0 - w), fb[implicit]])
    matrix = sparse.csr_matrix((data, (rows, cols)), shape=(mesh.n_cells, mesh.n_cells))

    face_source = np.zeros((mesh.n_boundary, field.ncomp))
    fixed = ~implicit
    face_source[fixed] = fb[fixed, None] * prescribed[fixed]
    graded = kinds == BCKind.FIXED_GRADIENT
    if graded.any():
        distance = boundary_normal_distance(mesh)
        face_source[graded] = (fb * distance)[graded, None] * prescribed[graded]
    source = np.zeros((mesh.n_cells, field.ncomp))
    np.add.at(source, b_cells, face_source)
    return SparseOperator(matrix, source)


def rhie_chow_flux(
    velocity: Field,
    pressure: Field,
    diag: np.ndarray,
    correction: Field | None = None,
) -> np.ndarray:
    """Momentum-interpolated face fluxes.

    ``diag`` holds the (cell-integrated) momentum diagonal coefficients.  The
    flux is ``interp(u).A + interp(rA grad p).A - interp(rA) snGrad(p)|A|``
    with ``rA = area / diag``, so a pressure field that the interpolated
    gradient cannot see (a checkerboard) still drives the flux.  Faces with a
    prescribed velocity carry exactly ``u_b . A``.
    """

    mesh = velocity.mesh
    diag = np.asarray(diag, dtype=np.float64)
    if diag.shape != (mesh.n_cells,):
        raise ContractViolation("one diagonal coefficient per cell is required")
    if np.any(diag == 0.0):
        raise SingularCouplingError(f"zero momentum diagonal in {int(np.sum(diag == 0.0))} cell(s)")

    r_area = mesh.cell_volumes / diag
    scaled_grad = r_area[:, None] * gauss_gradient(pressure)
    flux = face_flux(velocity)
    flux += np.einsum("ij,ij->i", interpolate_cells(mesh, scaled_grad), mesh.face_areas)
    flux -= laplacian_flux(pressure, interpolate_cells(mesh, r_area), correction)

    n = mesh.n_internal
    prescribed = velocity.boundary.kinds(mesh) == BCKind.FIXED_VALUE
    boundary_values = velocity.boundary.values(mesh, velocity.time, velocity.ncomp)
    flux[n:][prescribed] = np.einsum("ij,ij->i", boundary_values[prescribed], mesh.face_areas[n:][prescribed])
    return flux
