"""Evolve-Filter stepping of the Leray model.

Evolve: BDF2 momentum with extrapolated convecting flux, PISO coupling
(one momentum predictor, ``piso_correctors`` pressure corrections).
Filter: generalized Stokes problem ``(rho/dt) u - mu_bar lap(u) + grad(q_bar)
= (rho/dt) v`` with ``div(u) = 0``, SIMPLEC coupling.

Every coupling step ends with a pressure correction, so the returned face
fluxes are conservative to the pressure solver tolerance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from lerayrom.exceptions import BlowUpError
from lerayrom.fv import (
    BoundarySet,
    Factorization,
    Field,
    convective_operator,
    face_flux,
    gauss_gradient,
    incidence,
    interpolate_cells,
    laplacian,
    laplacian_matrix,
    mass_operator,
    non_orthogonal_source,
    rhie_chow_flux,
    solve_krylov,
)
from lerayrom.mesh import Mesh

from .physics import FlowBoundaries, PhysicsConfig, SolverSettings, bdf_coefficients

logger = logging.getLogger(__name__)

__all__ = [
    "CoupledSolution",
    "EvolveFilterSolver",
    "FomState",
    "GeneralizedStokesSolver",
    "continuity_residual",
    "kinetic_energy",
]


@dataclass
class FomState:
    t: float
    step: int
    v: np.ndarray
    q: np.ndarray
    u: np.ndarray
    q_bar: np.ndarray
    u_prev: np.ndarray
    flux: np.ndarray
    flux_prev: np.ndarray
    continuity: float = 0.0

    @classmethod
    def at_rest(cls, mesh: Mesh, t0: float = 0.0) -> "FomState":
        vec = np.zeros((mesh.n_cells, 2))
        scalar = np.zeros(mesh.n_cells)
        faces = np.zeros(mesh.n_faces)
        return cls(t0, 0, vec, scalar, vec.copy(), scalar.copy(), vec.copy(), faces, faces.copy())


@dataclass(frozen=True)
class CoupledSolution:
    velocity: np.ndarray
    pressure: np.ndarray
    flux: np.ndarray
    continuity: float
    iterations: int


def continuity_residual(mesh: Mesh, flux: np.ndarray) -> float:
    """Largest net cell outflow relative to the largest face flux."""

    scale = float(np.abs(flux).max()) if flux.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.abs(incidence(mesh) @ flux).max() / scale)


def kinetic_energy(mesh: Mesh, velocity: np.ndarray) -> float:
    return 0.5 * float(np.sum(mesh.cell_volumes[:, None] * velocity**2))


def _check_finite(name: str, values: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(values)):
        raise BlowUpError(name, t)


class GeneralizedStokesSolver:
    """SIMPLEC solver for ``m u - nu lap(u) + grad(p) = m v``, ``div(u) = 0``.

    The momentum and pressure matrices depend only on the mesh and the two
    coefficients, so both are factorized once.
    """

    def __init__(
        self,
        mesh: Mesh,
        mass: float,
        viscosity: float,
        velocity_bcs: BoundarySet,
        pressure_bcs: BoundarySet,
        settings: SolverSettings,
        label: str = "filter",
    ):
        if mass <= 0.0:
            raise ValueError("generalized Stokes problem needs a positive mass coefficient")
        self.mesh = mesh
        self.mass = mass
        self.viscosity = viscosity
        self.velocity_bcs = velocity_bcs
        self.pressure_bcs = pressure_bcs
        self.settings = settings
        self.label = label

        self._lap = laplacian_matrix(mesh, 1.0, velocity_bcs, ncomp=2)
        momentum = (mass_operator(mesh, mass, 2) - viscosity * self._lap).matrix
        self.diag = momentum.diagonal()
        self._off = (momentum - sparse.diags(self.diag)).tocsr()
        # SIMPLEC: A - H1 equals the row sum of the momentum matrix.
        self.consistent_diag = np.asarray(momentum.sum(axis=1)).ravel()
        self._r_area = mesh.cell_volumes / self.diag
        self._r_area_t = mesh.cell_volumes / self.consistent_diag
        self._gamma_t = interpolate_cells(mesh, self._r_area_t)
        self._pressure = laplacian_matrix(mesh, self._gamma_t, pressure_bcs)
        self._momentum_lu = Factorization(momentum, f"{label} momentum")
        self._pressure_lu = Factorization(-self._pressure.matrix, f"{label} pressure")

    def solve(self, v: np.ndarray, t: float, pressure_guess: np.ndarray | None = None) -> CoupledSolution:
        mesh, s = self.mesh, self.settings
        volumes = mesh.cell_volumes[:, None]
        bc_source = self.viscosity * laplacian_matrix(mesh, 1.0, self.velocity_bcs, t, 2).source
        base = self.mass * volumes * v + bc_source

        u = np.array(v, dtype=np.float64)
        p = np.zeros(mesh.n_cells) if pressure_guess is None else np.array(pressure_guess, dtype=np.float64)
        residual = np.inf
        flux = np.zeros(mesh.n_faces)
        iteration = 0
        for iteration in range(1, s.simplec_max_iterations + 1):
            p_field = Field(mesh, p, self.pressure_bcs, "q_bar", t)
            grad_p = gauss_gradient(p_field)
            rhs0 = base + self.viscosity * non_orthogonal_source(Field(mesh, u, self.velocity_bcs, "u", t), 1.0)
            predicted = self._momentum_lu.solve(rhs0 - volumes * grad_p)
            predicted_field = Field(mesh, predicted, self.velocity_bcs, "u", t)
            residual = continuity_residual(
                mesh, rhie_chow_flux(predicted_field, p_field, self.consistent_diag)
            )

            h_by_a = (rhs0 - self._off @ predicted) / self.diag[:, None]
            h_by_a -= (self._r_area - self._r_area_t)[:, None] * grad_p
            divergence = incidence(mesh) @ face_flux(Field(mesh, h_by_a, self.velocity_bcs, "HbyA", t))
            u, p, flux = self._correct(h_by_a, divergence, p, t)
            if residual <= s.simplec_tolerance:
                break
        else:
            logger.warning(
                "%s SIMPLEC stopped after %d iterations at continuity residual %.3e",
                self.label, iteration, residual,
            )
        _check_finite("u", u, t)
        _check_finite("q_bar", p, t)
        return CoupledSolution(u, p, flux, continuity_residual(mesh, flux), iteration)

    def _correct(self, h_by_a, divergence, p, t):
        mesh = self.mesh
        correction = Field(mesh, p, self.pressure_bcs, "q_bar", t)
        for k in range(self.settings.non_orthogonal_correctors + 1):
            rhs = divergence - self._pressure.source[:, 0] - non_orthogonal_source(correction, self._gamma_t)[:, 0]
            p = self._pressure_lu.solve(-rhs)
            if k < self.settings.non_orthogonal_correctors:
                correction = Field(mesh, p, self.pressure_bcs, "q_bar", t)
        p_field = Field(mesh, p, self.pressure_bcs, "q_bar", t)
        u = h_by_a - self._r_area_t[:, None] * gauss_gradient(p_field)
        flux = rhie_chow_flux(
            Field(mesh, u, self.velocity_bcs, "u", t), p_field, self.consistent_diag, correction
        )
        return u, p, flux


class EvolveFilterSolver:
    """Advances a :class:`FomState` by one Evolve-Filter step."""

    def __init__(
        self,
        mesh: Mesh,
        physics: PhysicsConfig,
        boundaries: FlowBoundaries,
        settings: SolverSettings | None = None,
    ):
        boundaries.check(mesh)
        self.mesh = mesh
        self.physics = physics
        self.boundaries = boundaries
        self.settings = settings or SolverSettings()
        self.velocity_bcs = boundaries.velocity()
        self.pressure_bcs = boundaries.pressure()

        rho, mu, dt = physics.rho, physics.mu, physics.dt
        # Stokes part of the BDF2 momentum matrix; its factors precondition every step.
        reference = (
            mass_operator(mesh, 1.5 * rho / dt, 2)
            - mu * laplacian_matrix(mesh, 1.0, self.velocity_bcs, ncomp=2)
        ).matrix
        self._momentum_pc = Factorization(reference, "momentum reference")
        gamma_ref = interpolate_cells(mesh, mesh.cell_volumes / reference.diagonal())
        self._pressure_pc = Factorization(
            -laplacian_matrix(mesh, gamma_ref, self.pressure_bcs).matrix, "pressure reference"
        )
        self.filter = GeneralizedStokesSolver(
            mesh,
            rho / dt,
            physics.filter_viscosity,
            self.velocity_bcs,
            self.pressure_bcs,
            self.settings,
        )

    def evolve_step(self, state: FomState, t_new: float) -> CoupledSolution:
        mesh, physics, s = self.mesh, self.physics, self.settings
        rho, mu, dt = physics.rho, physics.mu, physics.dt
        volumes = mesh.cell_volumes[:, None]
        a0, c1, c2, e1, e2 = bdf_coefficients(state.step == 0)

        convecting = e1 * state.flux + e2 * state.flux_prev
        previous = Field(mesh, state.v, self.velocity_bcs, "v", t_new)
        op = (
            mass_operator(mesh, rho * a0 / dt, 2)
            + rho * convective_operator(convecting, previous)
            - mu * laplacian(previous, 1.0)
        )
        source = rho / dt * (c1 * state.u + c2 * state.u_prev)
        rhs0 = volumes * source - op.source
        matrix = op.matrix
        diag = matrix.diagonal()
        off = (matrix - sparse.diags(diag)).tocsr()

        grad_q = gauss_gradient(Field(mesh, state.q, self.pressure_bcs, "q", t_new))
        v = solve_krylov(
            matrix,
            rhs0 - volumes * grad_q,
            state.v,
            rtol=s.momentum_tolerance,
            preconditioner=self._momentum_pc,
            label="momentum",
        )

        r_area = mesh.cell_volumes / diag
        gamma = interpolate_cells(mesh, r_area)
        pressure = laplacian_matrix(mesh, gamma, self.pressure_bcs, t_new)
        q = state.q
        flux = state.flux
        for _ in range(s.piso_correctors):
            h_by_a = (rhs0 - off @ v) / diag[:, None]
            divergence = incidence(mesh) @ face_flux(Field(mesh, h_by_a, self.velocity_bcs, "HbyA", t_new))
            correction = Field(mesh, q, self.pressure_bcs, "q", t_new)
            for k in range(s.non_orthogonal_correctors + 1):
                rhs = divergence - pressure.source[:, 0] - non_orthogonal_source(correction, gamma)[:, 0]
                q = solve_krylov(
                    -pressure.matrix,
                    -rhs,
                    q,
                    rtol=s.pressure_tolerance,
                    symmetric=True,
                    preconditioner=self._pressure_pc,
                    label="pressure",
                )
                if k < s.non_orthogonal_correctors:
                    correction = Field(mesh, q, self.pressure_bcs, "q", t_new)
            q_field = Field(mesh, q, self.pressure_bcs, "q", t_new)
            v = h_by_a - r_area[:, None] * gauss_gradient(q_field)
            flux = rhie_chow_flux(Field(mesh, v, self.velocity_bcs, "v", t_new), q_field, diag, correction)

        _check_finite("v", v, t_new)
        _check_finite("q", q, t_new)
        return CoupledSolution(v, q, flux, continuity_residual(mesh, flux), s.piso_correctors)

    def filter_step(self, v: np.ndarray, t_new: float, q_bar_guess: np.ndarray | None = None) -> CoupledSolution:
        return self.filter.solve(v, t_new, q_bar_guess)

    def step(self, state: FomState) -> FomState:
        t_new = self.physics.time(state.step + 1)
        evolved = self.evolve_step(state, t_new)
        filtered = self.filter_step(evolved.velocity, t_new, state.q_bar)
        return replace(
            state,
            t=t_new,
            step=state.step + 1,
            v=evolved.velocity,
            q=evolved.pressure,
            u=filtered.velocity,
            q_bar=filtered.pressure,
            u_prev=state.u,
            flux=filtered.flux,
            flux_prev=state.flux,
            continuity=filtered.continuity,
        )
