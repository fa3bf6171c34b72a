"""Galerkin projection of the full-order operators onto the reduced spaces.

Every matrix is built by applying the finite-volume operator of the stepper to
a mode and projecting the cell-integrated result on the test modes, so the
reduced model sees exactly the discretization that produced the snapshots.

The velocities are ``v = v_bc(t) chi + sum beta_j phi_j`` and
``u = u_bc(t) chi + sum beta_bar_k phi_bar_k``; blocks suffixed ``_chi``
carry the lifting.  Names of the stored arrays:

* evolve: ``M, Mt, A, B, P, G``; lifting ``m_chi, a_chi, p_chi, g_chi_conv,
  g_lift_mod, g_ll``
* filter: ``Mb, Ab, Bb, Pb``; lifting ``mb_chi, ab_chi, pb_chi``
* pressure Poisson (``ppe`` only): ``D, N, F, Fb, J, Db, Nb``; lifting
  ``f_chi, n_chi, nb_chi, j_chi_conv, j_lift_mod, j_ll``
* forces: ``aero_u`` per filter mode, ``aero_q`` per pressure mode and
  ``aero_chi``, each holding ``(c_d, c_l, c_d_tn, c_l_tn)``
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import os
import zipfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import linalg

from lerayrom.exceptions import ContractViolation, FingerprintError, MissingArtifactError, SnapshotFormatError
from lerayrom.fom.physics import FlowBoundaries, InletLaw, PhysicsConfig
from lerayrom.fv import Field, convective_operator, face_flux, gauss_gradient, incidence, laplacian
from lerayrom.mesh import Mesh
from lerayrom.postproc.aero import AeroReference, aero_coefficients

from .pod import PodBasis
from .snapshots import LiftingFunction, dof_weights
from .supremizer import EnrichedSpace, StabilizationMode, enrich, plain_space

logger = logging.getLogger(__name__)

__all__ = [
    "OperatorAssembler",
    "ReducedOperators",
    "RomSpaces",
    "build_spaces",
    "convection_matrix",
    "tensor_contract",
]

CONTAINER_TAG = "lerayrom-operators"
CONTAINER_VERSION = 1
INF_SUP_WARNING = 1e-8

COMMON_BLOCKS = (
    "M", "Mt", "A", "B", "P", "G",
    "Mb", "Ab", "Bb", "Pb",
    "m_chi", "a_chi", "p_chi", "g_chi_conv", "g_lift_mod", "g_ll",
    "mb_chi", "ab_chi", "pb_chi",
    "aero_u", "aero_q", "aero_chi",
)
PPE_BLOCKS = (
    "D", "N", "F", "Fb", "J", "Db", "Nb",
    "f_chi", "n_chi", "nb_chi", "j_chi_conv", "j_lift_mod", "j_ll",
)


def _digest(array: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(array, dtype="<f8").tobytes()).hexdigest()


@dataclass(frozen=True)
class RomSpaces:
    """Trial/test spaces of one stabilization mode."""

    mode: StabilizationMode
    evolve: EnrichedSpace
    filter: EnrichedSpace
    pressure: PodBasis
    filter_pressure: PodBasis

    def fingerprints(self) -> dict[str, str]:
        return {
            "evolve": _digest(self.evolve.modes),
            "filter": _digest(self.filter.modes),
            "pressure": _digest(self.pressure.modes),
            "filter_pressure": _digest(self.filter_pressure.modes),
        }


def build_spaces(
    mode: StabilizationMode | str,
    bases: Mapping[str, PodBasis],
    volumes: np.ndarray,
    n_s: int = 0,
    n_s_bar: int = 0,
) -> RomSpaces:
    """Evolve and filter spaces: plain POD for ``nos``/``ppe``, enriched for ``sup1``/``sup2``.

    ``sup1`` adds ``s`` modes to the evolve space and ``s_bar`` modes to the
    filter space; ``sup2`` adds both families to both, own family first.
    """

    mode = StabilizationMode(mode)
    v, u = bases["v"], bases["u"]
    if mode is StabilizationMode.SUP1:
        s, s_bar = bases["s"].truncate(n_s), bases["s_bar"].truncate(n_s_bar)
        evolve = enrich("evolve", v, [s], mode, volumes)
        filter_space = enrich("filter", u, [s_bar], mode, volumes)
    elif mode is StabilizationMode.SUP2:
        s, s_bar = bases["s"].truncate(n_s), bases["s_bar"].truncate(n_s_bar)
        evolve = enrich("evolve", v, [s, s_bar], mode, volumes)
        filter_space = enrich("filter", u, [s_bar, s], mode, volumes)
    else:
        evolve = plain_space("evolve", v)
        filter_space = plain_space("filter", u)
    return RomSpaces(mode, evolve, filter_space, bases["q"], bases["q_bar"])


def convection_matrix(g: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``sum_k G[:, :, k] w_k``."""

    return np.einsum("ijk,k->ij", g, weights)


def tensor_contract(
    g: np.ndarray,
    beta_bar: np.ndarray,
    beta_bar_prev: np.ndarray,
    beta: np.ndarray,
    first_step: bool = False,
) -> np.ndarray:
    """Convective term with the extrapolated filtered velocity as transport."""

    if g.shape[1] != beta.size or g.shape[2] != beta_bar.size or beta_bar.shape != beta_bar_prev.shape:
        raise ContractViolation(f"tensor {g.shape} does not match coefficients {beta.size}, {beta_bar.size}")
    transport = beta_bar if first_step else 2.0 * beta_bar - beta_bar_prev
    return convection_matrix(g, transport) @ beta


class ReducedOperators:
    """Named reduced arrays plus the metadata an online run needs."""

    def __init__(self, mode: StabilizationMode | str, arrays: Mapping[str, np.ndarray], metadata: Mapping):
        self.mode = StabilizationMode(mode)
        self.arrays = {name: np.asarray(value, dtype=np.float64) for name, value in arrays.items()}
        self.metadata = dict(metadata)
        required = COMMON_BLOCKS + (PPE_BLOCKS if self.mode is StabilizationMode.PPE else ())
        missing = [name for name in required if name not in self.arrays]
        if missing:
            raise ContractViolation(f"{self.mode.value} operators lack {missing}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self.arrays

    @property
    def n_v(self) -> int:
        return self.arrays["M"].shape[0]

    @property
    def n_u(self) -> int:
        return self.arrays["Mb"].shape[0]

    @property
    def n_q(self) -> int:
        return self.arrays["P"].shape[0]

    @property
    def n_q_bar(self) -> int:
        return self.arrays["Pb"].shape[0]

    @property
    def physics(self) -> PhysicsConfig:
        return PhysicsConfig(**self.metadata["physics"])

    @property
    def inlet_law(self) -> InletLaw:
        return InletLaw(**self.metadata["inlet"])

    def check_spaces(self, spaces: RomSpaces) -> None:
        stored = self.metadata.get("spaces", {})
        for name, digest in spaces.fingerprints().items():
            if stored.get(name) != digest:
                raise FingerprintError(stored.get(name, "-"), digest, f"{name} basis")

    def save(self, path: str | os.PathLike) -> Path:
        """Deterministic zip of ``.npy`` members and ``metadata.json``."""

        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        metadata = {"format": CONTAINER_TAG, "version": CONTAINER_VERSION, "mode": self.mode.value, **self.metadata}
        tmp = path.with_name(path.name + ".tmp")
        with zipfile.ZipFile(tmp, "w") as archive:
            for name in sorted(self.arrays):
                buffer = io.BytesIO()
                np.lib.format.write_array(buffer, np.ascontiguousarray(self.arrays[name], dtype="<f8"))
                archive.writestr(zipfile.ZipInfo(f"{name}.npy", date_time=(1980, 1, 1, 0, 0, 0)), buffer.getvalue())
            archive.writestr(
                zipfile.ZipInfo("metadata.json", date_time=(1980, 1, 1, 0, 0, 0)),
                json.dumps(metadata, sort_keys=True, indent=2),
            )
        os.replace(tmp, path)
        return path

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ReducedOperators":
        path = Path(path)
        if not path.exists():
            raise MissingArtifactError(path)
        try:
            with zipfile.ZipFile(path) as archive:
                metadata = json.loads(archive.read("metadata.json"))
                arrays = {
                    name[: -len(".npy")]: np.lib.format.read_array(io.BytesIO(archive.read(name)), allow_pickle=False)
                    for name in archive.namelist()
                    if name.endswith(".npy")
                }
        except (zipfile.BadZipFile, KeyError, ValueError) as exc:
            raise SnapshotFormatError(f"{path}: unreadable operator container ({exc})") from exc
        if metadata.pop("format", None) != CONTAINER_TAG or metadata.pop("version", None) != CONTAINER_VERSION:
            raise SnapshotFormatError(f"{path}: not a version {CONTAINER_VERSION} operator container")
        return cls(metadata.pop("mode"), arrays, metadata)


class OperatorAssembler:
    """Projects evolve, filter and pressure Poisson operators on :class:`RomSpaces`."""

    def __init__(
        self,
        mesh: Mesh,
        physics: PhysicsConfig,
        boundaries: FlowBoundaries,
        lifting: LiftingFunction,
        reference: AeroReference | None = None,
    ):
        boundaries.check(mesh)
        self.mesh = mesh
        self.physics = physics
        self.boundaries = boundaries
        self.lifting = lifting
        self.reference = reference or AeroReference()
        self.velocity_bcs = boundaries.homogeneous_velocity()
        self.pressure_bcs = boundaries.pressure()
        self.chi = lifting.as_field(mesh, boundaries)
        self.chi_flux = face_flux(self.chi)
        # Pressure Poisson boundary terms live where the pressure is not prescribed.
        self._neumann = np.concatenate(
            [np.arange(mesh.patch(name).start, mesh.patch(name).start + mesh.patch(name).size) for name in boundaries.dirichlet]
        )

    # Full-order actions on single fields ----------------------------------------

    def _velocity(self, values: np.ndarray) -> Field:
        return Field(self.mesh, values.reshape(-1, 2), self.velocity_bcs, "phi")

    def _pressure(self, values: np.ndarray) -> Field:
        return Field(self.mesh, values, self.pressure_bcs, "psi")

    @staticmethod
    def _laplacian(field: Field) -> np.ndarray:
        return laplacian(field, 1.0).apply(field.values)

    @staticmethod
    def _convection(flux: np.ndarray, field: Field) -> np.ndarray:
        return convective_operator(flux, field).apply(field.values)

    def _divergence(self, field: Field) -> np.ndarray:
        return incidence(self.mesh) @ face_flux(field)

    def _gradient(self, field: Field) -> np.ndarray:
        return self.mesh.cell_volumes[:, None] * gauss_gradient(field)

    def _boundary_traces(self, field: Field) -> tuple[np.ndarray, np.ndarray]:
        """Face values and owner gradients on the Neumann faces."""

        b = self._neumann - self.mesh.n_internal
        return field.boundary_values()[b], gauss_gradient(field)[self.mesh.owner[self._neumann]]

    def _curl_weights(self, psi: Field) -> np.ndarray:
        """``|A| (n x grad psi)`` per Neumann face, with ``n x a = n_x a_y - n_y a_x``."""

        _, grad = self._boundary_traces(psi)
        normals = self.mesh.face_normals[self._neumann]
        return self.mesh.face_mag[self._neumann] * (normals[:, 0] * grad[:, 1] - normals[:, 1] * grad[:, 0])

    def _vorticity(self, field: Field) -> np.ndarray:
        _, grad = self._boundary_traces(field)
        return grad[:, 1, 0] - grad[:, 0, 1]

    def _normal_flux(self, field: Field) -> np.ndarray:
        values, _ = self._boundary_traces(field)
        return np.einsum("fi,fi->f", values, self.mesh.face_areas[self._neumann])

    # Assembly -------------------------------------------------------------------

    def assemble(self, spaces: RomSpaces) -> ReducedOperators:
        mesh = self.mesh
        for basis in (spaces.pressure, spaces.filter_pressure):
            if basis.fingerprint != mesh.fingerprint:
                raise FingerprintError(mesh.fingerprint, basis.fingerprint, f"basis '{basis.field}'")
        for space in (spaces.evolve, spaces.filter):
            if space.fingerprint != mesh.fingerprint:
                raise FingerprintError(mesh.fingerprint, space.fingerprint, f"{space.name} space")
        mode = spaces.mode
        if mode.enriched != (spaces.evolve.variant == mode.value):
            raise ContractViolation(f"{mode.value} operators need {mode.value} spaces, got '{spaces.evolve.variant}'")

        w = dof_weights(mesh.cell_volumes, 2)
        e = spaces.evolve.modes
        f = spaces.filter.modes
        psi = spaces.pressure.modes
        psi_bar = spaces.filter_pressure.modes
        phi_fields = [self._velocity(e[:, j]) for j in range(e.shape[1])]
        phib_fields = [self._velocity(f[:, k]) for k in range(f.shape[1])]
        psi_fields = [self._pressure(psi[:, i]) for i in range(psi.shape[1])]
        psib_fields = [self._pressure(psi_bar[:, i]) for i in range(psi_bar.shape[1])]
        phib_flux = [face_flux(field) for field in phib_fields]
        chi = self.chi
        chi_flat = chi.values.ravel()

        def velocity_columns(fields, action) -> np.ndarray:
            return np.column_stack([action(field).ravel() for field in fields]) if fields else np.zeros((w.size, 0))

        def scalar_columns(fields, action) -> np.ndarray:
            return np.column_stack([action(field) for field in fields]) if fields else np.zeros((mesh.n_cells, 0))

        arrays: dict[str, np.ndarray] = {}
        # Evolve block.
        arrays["M"] = e.T @ (w[:, None] * e)
        arrays["Mt"] = e.T @ (w[:, None] * f)
        arrays["A"] = e.T @ velocity_columns(phi_fields, self._laplacian)
        arrays["B"] = e.T @ velocity_columns(psi_fields, self._gradient)
        arrays["P"] = psi.T @ scalar_columns(phi_fields, self._divergence)
        arrays["G"] = self._convection_tensor(e, phi_fields, phib_flux)
        arrays["m_chi"] = e.T @ (w * chi_flat)
        arrays["a_chi"] = e.T @ self._laplacian(chi).ravel()
        arrays["p_chi"] = psi.T @ self._divergence(chi)
        arrays["g_chi_conv"] = e.T @ velocity_columns(phi_fields, lambda field: self._convection(self.chi_flux, field))
        arrays["g_lift_mod"] = (
            e.T @ np.column_stack([self._convection(flux, chi).ravel() for flux in phib_flux])
            if phib_flux
            else np.zeros((e.shape[1], 0))
        )
        arrays["g_ll"] = e.T @ self._convection(self.chi_flux, chi).ravel()

        # Filter block.
        arrays["Mb"] = f.T @ (w[:, None] * f)
        arrays["Ab"] = f.T @ velocity_columns(phib_fields, self._laplacian)
        arrays["Bb"] = f.T @ velocity_columns(psib_fields, self._gradient)
        arrays["Pb"] = psi_bar.T @ scalar_columns(phib_fields, self._divergence)
        arrays["mb_chi"] = f.T @ (w * chi_flat)
        arrays["ab_chi"] = f.T @ self._laplacian(chi).ravel()
        arrays["pb_chi"] = psi_bar.T @ self._divergence(chi)

        if mode is StabilizationMode.PPE:
            arrays.update(self._pressure_poisson(phi_fields, phib_fields, phib_flux, psi_fields, psib_fields))

        arrays.update(self._forces(phib_fields, psi_fields))
        metadata = self._metadata(spaces, arrays)
        return ReducedOperators(mode, arrays, metadata)

    def _convection_tensor(self, test: np.ndarray, fields: list[Field], fluxes: list[np.ndarray]) -> np.ndarray:
        g = np.zeros((test.shape[1], len(fields), len(fluxes)))
        for k, flux in enumerate(fluxes):
            for j, field in enumerate(fields):
                g[:, j, k] = test.T @ self._convection(flux, field).ravel()
        return g

    def _pressure_poisson(self, phi_fields, phib_fields, phib_flux, psi_fields, psib_fields) -> dict[str, np.ndarray]:
        volumes = self.mesh.cell_volumes
        chi = self.chi

        def gradients(fields) -> np.ndarray:
            return np.array([gauss_gradient(field) for field in fields]).reshape(len(fields), self.mesh.n_cells, 2)

        def stiffness(grads) -> np.ndarray:
            return np.einsum("icd,jcd,c->ij", grads, grads, volumes)

        def boundary_matrix(rows: np.ndarray, fields) -> np.ndarray:
            cols = np.array([self._vorticity(field) for field in fields]).reshape(len(fields), -1)
            return rows @ cols.T

        def normal_matrix(traces: np.ndarray, fields) -> np.ndarray:
            cols = np.array([self._normal_flux(field) for field in fields]).reshape(len(fields), -1)
            return traces @ cols.T

        def poisson_projection(grads, vector: np.ndarray) -> np.ndarray:
            return np.einsum("icd,cd->i", grads, vector)

        grad_psi = gradients(psi_fields)
        grad_psib = gradients(psib_fields)
        curl_psi = np.array([self._curl_weights(field) for field in psi_fields]).reshape(len(psi_fields), -1)
        curl_psib = np.array([self._curl_weights(field) for field in psib_fields]).reshape(len(psib_fields), -1)
        trace_psi = np.array([self._boundary_traces(field)[0][:, 0] for field in psi_fields]).reshape(len(psi_fields), -1)

        j = np.zeros((len(psi_fields), len(phi_fields), len(phib_flux)))
        for k, flux in enumerate(phib_flux):
            for jj, field in enumerate(phi_fields):
                j[:, jj, k] = poisson_projection(grad_psi, self._convection(flux, field))

        out = {
            "D": stiffness(grad_psi),
            "N": boundary_matrix(curl_psi, phi_fields),
            "F": normal_matrix(trace_psi, phi_fields),
            "Fb": normal_matrix(trace_psi, phib_fields),
            "J": j,
            "Db": stiffness(grad_psib),
            "Nb": boundary_matrix(curl_psib, phib_fields),
            "f_chi": trace_psi @ self._normal_flux(chi),
            "n_chi": curl_psi @ self._vorticity(chi),
            "nb_chi": curl_psib @ self._vorticity(chi),
            "j_chi_conv": np.array(
                [poisson_projection(grad_psi, self._convection(self.chi_flux, field)) for field in phi_fields]
            ).reshape(len(phi_fields), len(psi_fields)).T,
            "j_lift_mod": np.array(
                [poisson_projection(grad_psi, self._convection(flux, chi)) for flux in phib_flux]
            ).reshape(len(phib_flux), len(psi_fields)).T,
            "j_ll": poisson_projection(grad_psi, self._convection(self.chi_flux, chi)),
        }
        return out

    def _forces(self, phib_fields: list[Field], psi_fields: list[Field]) -> dict[str, np.ndarray]:
        mesh, physics = self.mesh, self.physics
        n_u, n_q = len(phib_fields), len(psi_fields)
        if not mesh.has_patch(self.reference.patch):
            return {"aero_u": np.zeros((n_u, 4)), "aero_q": np.zeros((n_q, 4)), "aero_chi": np.zeros(4)}
        zero_velocity = self._velocity(np.zeros((mesh.n_cells, 2)))
        zero_pressure = self._pressure(np.zeros(mesh.n_cells))

        def coefficients(velocity: Field, pressure: Field) -> np.ndarray:
            return aero_coefficients(velocity, pressure, physics.rho, physics.mu, self.reference).as_array()

        return {
            "aero_u": np.array([coefficients(field, zero_pressure) for field in phib_fields]).reshape(n_u, 4),
            "aero_q": np.array([coefficients(zero_velocity, field) for field in psi_fields]).reshape(n_q, 4),
            "aero_chi": coefficients(self.chi, zero_pressure),
        }

    def _metadata(self, spaces: RomSpaces, arrays: Mapping[str, np.ndarray]) -> dict:
        mass = arrays["M"]
        b = arrays["B"]
        condition = float(np.linalg.cond(mass)) if mass.size else 0.0
        singular = linalg.svdvals(b) if b.size else np.zeros(0)
        sigma_min = float(singular.min()) if b.shape[0] >= b.shape[1] and singular.size else 0.0
        if b.shape[1] and sigma_min <= INF_SUP_WARNING:
            logger.warning(
                "%s: reduced pressure gradient is rank deficient (sigma_min %.3e)", spaces.mode.value, sigma_min
            )
        logger.info(
            "%s operators: %d evolve, %d filter, %d + %d pressure modes, cond(M)=%.3e",
            spaces.mode.value, spaces.evolve.n, spaces.filter.n,
            spaces.pressure.n_modes, spaces.filter_pressure.n_modes, condition,
        )
        return {
            "mesh": self.mesh.fingerprint,
            "physics": asdict(self.physics),
            "inlet": asdict(self.boundaries.inlet_law),
            "blocks": {
                "evolve": [list(block) for block in spaces.evolve.blocks],
                "filter": [list(block) for block in spaces.filter.blocks],
            },
            "spaces": spaces.fingerprints(),
            "mass_condition": condition,
            "inf_sup_sigma_min": sigma_min,
            "forces": self.mesh.has_patch(self.reference.patch),
        }
