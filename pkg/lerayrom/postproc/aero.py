"""Drag and lift on the cylinder patch."""

from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

from lerayrom.exceptions import ContractViolation
from lerayrom.fv import Field, gauss_gradient
from lerayrom.fv.fields import boundary_normal_distance

__all__ = ["AeroCoefficients", "AeroReference", "aero_coefficients"]


@dataclass(frozen=True)
class AeroReference:
    velocity: float = 1.0
    length: float = 0.1
    patch: str = "cylinder"


@dataclass(frozen=True)
class AeroCoefficients:
    """``c_d, c_l`` from x/y force components; ``*_tn`` from the tangent/normal form."""

    c_d: float
    c_l: float
    c_d_tn: float
    c_l_tn: float

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self))


def _wall_gradient(velocity: Field, faces: slice) -> np.ndarray:
    """Owner-cell gradient with its normal derivative replaced by the wall difference."""

    mesh = velocity.mesh
    owners = mesh.owner[faces]
    normals = mesh.face_normals[faces]
    b = slice(faces.start - mesh.n_internal, faces.stop - mesh.n_internal)
    distance = boundary_normal_distance(mesh)[b]
    grad = gauss_gradient(velocity)[owners]
    wall = velocity.boundary_values()[b]
    normal_derivative = (wall - velocity.columns[owners]) / distance[:, None]
    missing = normal_derivative - np.einsum("fij,fj->fi", grad, normals)
    return grad + missing[:, :, None] * normals[:, None, :]


def aero_coefficients(
    velocity: Field,
    pressure: Field,
    rho: float,
    mu: float,
    reference: AeroReference | None = None,
) -> AeroCoefficients:
    """Force coefficients ``2 F / (rho L U^2)`` of the fluid acting on the patch.

    The x/y form integrates the full Newtonian traction
    ``(mu (grad u + grad u^T) - q I) n``; the tangent/normal form uses
    ``mu d(u.t)/dn n_y - q n_x`` for drag and ``-(mu d(u.t)/dn n_x + q n_y)``
    for lift, with ``n`` pointing from the body into the fluid and
    ``t = (n_y, -n_x)``.
    """

    reference = reference or AeroReference()
    mesh = velocity.mesh
    if not mesh.has_patch(reference.patch):
        raise ContractViolation(f"mesh has no '{reference.patch}' patch for force integration")
    faces = mesh.patch(reference.patch).faces
    if faces.stop == faces.start:
        return AeroCoefficients(0.0, 0.0, 0.0, 0.0)

    grad = _wall_gradient(velocity, faces)
    q = pressure.boundary_values()[faces.start - mesh.n_internal : faces.stop - mesh.n_internal, 0]
    area = mesh.face_mag[faces]
    n_body = -mesh.face_normals[faces]

    stress = mu * (grad + np.transpose(grad, (0, 2, 1))) - q[:, None, None] * np.eye(2)
    traction = np.einsum("fij,fj->fi", stress, n_body) * area[:, None]
    force = traction.sum(axis=0)

    tangent = np.column_stack([n_body[:, 1], -n_body[:, 0]])
    du_dn = np.einsum("fij,fj->fi", grad, n_body)
    dut_dn = np.einsum("fi,fi->f", du_dn, tangent)
    drag_tn = np.sum((mu * dut_dn * n_body[:, 1] - q * n_body[:, 0]) * area)
    lift_tn = -np.sum((mu * dut_dn * n_body[:, 0] + q * n_body[:, 1]) * area)

    scale = 2.0 / (rho * reference.length * reference.velocity**2)
    return AeroCoefficients(
        float(scale * force[0]),
        float(scale * force[1]),
        float(scale * drag_tn),
        float(scale * lift_tn),
    )
