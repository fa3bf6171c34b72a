import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from lerayrom.fom import FlowBoundaries, InletLaw, PhysicsConfig, bdf_coefficients, run_fom
from lerayrom.fv import Field, convective_operator, face_flux, gauss_gradient, incidence, laplacian
from lerayrom.mesh import generate_rectangle_mesh
from lerayrom.postproc import error_series
from lerayrom.rom import (
    LiftingFunction,
    OperatorAssembler,
    ReducedModel,
    RomState,
    SnapshotMatrix,
    SupremizerSet,
    SupremizerSolver,
    build_lifting,
    build_spaces,
    compute_basis,
    correlation_matrix,
    homogenize,
    init_state,
    reconstruct,
    run_rom,
)

from .test_assembly import small_problem


class ReducedModelTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.mesh, cls.boundaries, cls.physics, cls.lifting, cls.bases = small_problem()
        cls.spaces = build_spaces("nos", cls.bases, cls.mesh.cell_volumes)
        cls.ops = OperatorAssembler(cls.mesh, cls.physics, cls.boundaries, cls.lifting).assemble(cls.spaces)

    def test_runs_are_reproducible(self):
        first = run_rom(self.ops)
        second = run_rom(self.ops)

        pd.testing.assert_frame_equal(first.trajectory, second.trajectory)
        pd.testing.assert_frame_equal(first.forces, second.forces)

    def test_trajectory_layout(self):
        run = run_rom(self.ops, record_times=[0.05, 0.1])

        self.assertEqual(len(run.trajectory), 10)
        self.assertEqual(run.trajectory.columns[0], "t")
        self.assertEqual(list(run.trajectory.columns[-2:]), ["cond_evolve", "cond_filter"])
        self.assertEqual(run.trajectory.shape[1], 1 + 3 + 2 + 2 + 2 + 2)
        np.testing.assert_allclose(run.times, [0.05, 0.1])
        self.assertEqual(run.coefficients["beta"].shape, (2, 3))
        self.assertEqual(run.coefficients["gamma_bar"].shape, (2, 2))
        self.assertIsNone(run.diverged_at)

    def test_without_lifting_rest_is_preserved(self):
        still = LiftingFunction(np.zeros((self.mesh.n_cells, 2)), self.boundaries.inlet_law, self.mesh.fingerprint)
        ops = OperatorAssembler(self.mesh, self.physics, self.boundaries, still).assemble(self.spaces)

        run = run_rom(ops)

        np.testing.assert_array_equal(run.final_state.beta_bar, 0.0)
        np.testing.assert_array_equal(run.forces[["c_d", "c_l"]].to_numpy(), 0.0)

    def test_initial_projection_recovers_coefficients(self):
        c = np.array([0.4, -0.1, 0.9])
        t0 = 0.5
        v0 = self.lifting.v_bc(t0) * self.lifting.values + (self.spaces.evolve.modes @ c).reshape(-1, 2)

        state = init_state(self.spaces, self.mesh.cell_volumes, self.lifting, t0, v0=v0)

        np.testing.assert_allclose(state.beta, c, atol=1e-10)
        np.testing.assert_array_equal(state.beta_bar, 0.0)

    def test_reconstruction(self):
        run = run_rom(self.ops, record_times=[0.1])
        fields = reconstruct(run, self.spaces, self.lifting)

        expected_u = self.spaces.filter.modes @ run.coefficients["beta_bar"][0] + self.lifting.v_bc(0.1) * self.lifting.values.ravel()
        np.testing.assert_allclose(fields["u"].values[:, 0], expected_u)
        self.assertEqual(fields["q"].ncomp, 1)
        self.assertEqual(fields["v"].fingerprint, self.mesh.fingerprint)

    def test_step_from_rest(self):
        model = ReducedModel(self.ops)
        state, cond_evolve, cond_filter = model.step(RomState.at_rest(self.ops))

        self.assertEqual(state.step, 1)
        self.assertAlmostEqual(state.t, 0.01)
        self.assertTrue(np.isfinite(cond_evolve) and np.isfinite(cond_filter))


class GalerkinResidualTests(SimpleTestCase):
    """Reduced step systems equal the projected full-order step residuals.

    A full-order solution inside the reduced spaces therefore solves the
    reduced systems, and the reduced step zeroes the projected residual.
    """

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.mesh, cls.boundaries, cls.physics, cls.lifting, cls.bases = small_problem(seed=7)
        cls.assembler = OperatorAssembler(cls.mesh, cls.physics, cls.boundaries, cls.lifting)
        cls.law = cls.boundaries.inlet_law
        cls.volumes = cls.mesh.cell_volumes[:, None]

    def velocity(self, values, t):
        return Field(self.mesh, values.reshape(-1, 2), self.boundaries.velocity(), "v", t)

    def homogeneous(self, flat):
        return Field(self.mesh, flat.reshape(-1, 2), self.boundaries.homogeneous_velocity())

    def pressure(self, values):
        return Field(self.mesh, values, self.boundaries.pressure())

    def random_state(self, ops, step):
        rng = np.random.default_rng(step + 1)
        t = 0.37 if step else 0.2
        return RomState(
            t,
            step,
            rng.standard_normal(ops.n_v),
            rng.standard_normal(ops.n_q),
            rng.standard_normal(ops.n_u),
            rng.standard_normal(ops.n_q_bar),
            rng.standard_normal(ops.n_u),
        )

    def poisson_rows(self, modes, pressure, velocity, viscosity):
        """Weak pressure Poisson terms shared by both steps, one row per pressure mode."""

        a = self.assembler
        rows = []
        for i in range(modes.shape[1]):
            psi = self.pressure(modes[:, i])
            stiffness = np.sum(self.volumes * gauss_gradient(psi) * gauss_gradient(pressure))
            rows.append(stiffness - viscosity * a._curl_weights(psi) @ a._vorticity(velocity))
        return np.array(rows)

    def evolve_residual(self, spaces, state, t_new, beta, gamma, ppe):
        mesh, law, a = self.mesh, self.law, self.assembler
        rho, mu, dt = self.physics.rho, self.physics.mu, self.physics.dt
        a0, c1, c2, e1, e2 = bdf_coefficients(state.step == 0)
        chi = self.lifting.values
        f = spaces.filter.modes
        ubc_n, ubc_prev = law.coefficient(state.t), law.coefficient(state.t - dt)

        transport = e1 * state.beta_bar + e2 * state.beta_bar_prev
        flux = face_flux(self.homogeneous(f @ transport)) + (e1 * ubc_n + e2 * ubc_prev) * a.chi_flux
        mixed = c1 * state.beta_bar + c2 * state.beta_bar_prev
        history = (f @ mixed).reshape(-1, 2) + (c1 * ubc_n + c2 * ubc_prev) * chi
        v = self.velocity((spaces.evolve.modes @ beta).reshape(-1, 2) + law.coefficient(t_new) * chi, t_new)
        q = self.pressure(spaces.pressure.modes @ gamma)
        convection = convective_operator(flux, v).apply(v.values)

        momentum = (
            rho * a0 / dt * self.volumes * v.values
            + rho * convection
            - mu * laplacian(v, 1.0).apply(v.values)
            + self.volumes * gauss_gradient(q)
            - rho / dt * self.volumes * history
        )
        rows = spaces.evolve.modes.T @ momentum.ravel()
        psi = spaces.pressure.modes
        if not ppe:
            return rows, psi.T @ (incidence(mesh) @ face_flux(v))

        history_flux = a._normal_flux(self.homogeneous(f @ mixed)) + (c1 * ubc_n + c2 * ubc_prev) * a._normal_flux(a.chi)
        normal = rho * a0 / dt * a._normal_flux(v) - rho / dt * history_flux
        poisson = self.poisson_rows(psi, q, v, mu)
        for i in range(psi.shape[1]):
            field = self.pressure(psi[:, i])
            poisson[i] += rho * np.sum(gauss_gradient(field) * convection)
            poisson[i] += a._boundary_traces(field)[0][:, 0] @ normal
        return rows, poisson

    def filter_residual(self, spaces, beta, t_new, beta_bar, gamma_bar, ppe):
        rho, dt = self.physics.rho, self.physics.dt
        mu_bar = self.physics.filter_viscosity
        chi = self.lifting.values
        coefficient = self.law.coefficient(t_new)
        v = (spaces.evolve.modes @ beta).reshape(-1, 2) + coefficient * chi
        u = self.velocity((spaces.filter.modes @ beta_bar).reshape(-1, 2) + coefficient * chi, t_new)
        q_bar = self.pressure(spaces.filter_pressure.modes @ gamma_bar)

        momentum = (
            rho / dt * self.volumes * u.values
            - mu_bar * laplacian(u, 1.0).apply(u.values)
            + self.volumes * gauss_gradient(q_bar)
            - rho / dt * self.volumes * v
        )
        rows = spaces.filter.modes.T @ momentum.ravel()
        psi_bar = spaces.filter_pressure.modes
        if not ppe:
            return rows, psi_bar.T @ (incidence(self.mesh) @ face_flux(u))
        return rows, self.poisson_rows(psi_bar, q_bar, u, mu_bar)

    def assertSameResidual(self, matrix, rhs, x, expected):
        actual = matrix @ x - rhs
        scale = np.abs(matrix).max() * np.abs(x).max() + np.abs(rhs).max()
        np.testing.assert_allclose(actual, expected, rtol=1e-9, atol=1e-11 * scale)

    def test_reduced_systems_project_full_order_residuals(self):
        rng = np.random.default_rng(5)
        for mode in ("nos", "ppe", "sup1", "sup2"):
            spaces = build_spaces(mode, self.bases, self.mesh.cell_volumes, 1, 1)
            model = ReducedModel(self.assembler.assemble(spaces))
            ops = model.ops
            ppe = mode == "ppe"
            for step in (0, 5):
                with self.subTest(mode=mode, step=step):
                    state = self.random_state(ops, step)
                    t_new = state.t + self.physics.dt
                    beta, gamma = rng.standard_normal(ops.n_v), rng.standard_normal(ops.n_q)
                    matrix, rhs = model.evolve_system(state, t_new)
                    self.assertSameResidual(
                        matrix, rhs, np.concatenate([beta, gamma]),
                        np.concatenate(self.evolve_residual(spaces, state, t_new, beta, gamma, ppe)),
                    )

                    beta_bar, gamma_bar = rng.standard_normal(ops.n_u), rng.standard_normal(ops.n_q_bar)
                    matrix, rhs = model.filter_system(beta, t_new)
                    self.assertSameResidual(
                        matrix, rhs, np.concatenate([beta_bar, gamma_bar]),
                        np.concatenate(self.filter_residual(spaces, beta, t_new, beta_bar, gamma_bar, ppe)),
                    )

    def test_reduced_step_zeroes_projected_residual(self):
        for mode in ("nos", "ppe"):
            with self.subTest(mode=mode):
                spaces = build_spaces(mode, self.bases, self.mesh.cell_volumes)
                model = ReducedModel(self.assembler.assemble(spaces))
                state = self.random_state(model.ops, 5)
                t_new = state.t + self.physics.dt

                beta, gamma, _ = model.step_evolve(state, t_new)
                residual = np.concatenate(self.evolve_residual(spaces, state, t_new, beta, gamma, mode == "ppe"))
                matrix, rhs = model.evolve_system(state, t_new)
                scale = np.abs(matrix).max() * np.abs(np.concatenate([beta, gamma])).max() + np.abs(rhs).max()

                self.assertLess(np.abs(residual).max(), 1e-9 * scale)


class OfflineOnlineTests(SimpleTestCase):
    """Small channel run through the whole reduction chain."""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        mesh = generate_rectangle_mesh(16, 8, lx=2.0, ly=0.5)
        law = InletLaw(height=0.5, amplitude=1.0, period=2.0)
        boundaries = FlowBoundaries(inlet=("left",), outlet=("right",), walls=("bottom", "top"), inlet_law=law)
        physics = PhysicsConfig(rho=1.0, mu=0.02, alpha=0.02, dt=0.01, t0=0.0, t_end=1.0)
        times = np.round(np.arange(1, 21) * 0.05, 10)
        fom = run_fom(physics, mesh, boundaries, times)
        lifting = build_lifting(mesh, boundaries)
        volumes = mesh.cell_volumes

        snapshots = {
            name: SnapshotMatrix.from_fields(name, fom.snapshots[name], fom.times, mesh.fingerprint)
            for name in ("v", "u", "q", "q_bar")
        }
        reduced = dict(snapshots, v=homogenize(snapshots["v"], lifting), u=homogenize(snapshots["u"], lifting))
        supremizers = SupremizerSet.from_pressures(
            snapshots["q"], snapshots["q_bar"], SupremizerSolver.for_flow(mesh, boundaries)
        )
        reduced.update(s=supremizers.s, s_bar=supremizers.s_bar)

        bases = {}
        for name, matrix in reduced.items():
            c = correlation_matrix(matrix, volumes)
            if name in ("s", "s_bar"):
                bases[name] = compute_basis(c, matrix, volumes, mode_count=1)
            else:
                bases[name] = compute_basis(c, matrix, volumes, energy_target=0.9999)

        assembler = OperatorAssembler(mesh, physics, boundaries, lifting)
        cls.fom_u = snapshots["u"]
        cls.weights = np.repeat(volumes, 2)
        cls.runs = {}
        cls.errors = {}
        for mode in ("nos", "ppe", "sup1", "sup2"):
            spaces = build_spaces(mode, bases, volumes, 1, 1)
            run = run_rom(assembler.assemble(spaces), record_times=times)
            rom_u = reconstruct(run, spaces, lifting)["u"]
            cls.runs[mode] = run
            cls.errors[mode] = error_series("u", times, cls.fom_u.values, rom_u.values, cls.weights)

    def test_every_variant_completes(self):
        for mode, run in self.runs.items():
            self.assertEqual(len(run.trajectory), 100, mode)
            self.assertEqual(run.times.size, 20, mode)

    def test_continuity_based_variants_track_the_full_order_model(self):
        for mode in ("nos", "sup1"):
            self.assertIsNone(self.runs[mode].diverged_at, mode)
            self.assertLess(self.errors[mode].summary()["max"], 0.1, mode)
