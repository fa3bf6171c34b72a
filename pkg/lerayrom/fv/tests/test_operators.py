import numpy as np
from django.test import SimpleTestCase
from scipy import sparse

from lerayrom.exceptions import ContractViolation, SingularCouplingError, SolverError
from lerayrom.fv import (
    BoundaryCondition,
    BoundarySet,
    Factorization,
    Field,
    convective_operator,
    face_interp_central,
    gauss_divergence,
    gauss_gradient,
    laplacian,
    laplacian_matrix,
    rhie_chow_flux,
    solve_krylov,
)
from lerayrom.mesh import generate_rectangle_mesh

PATCHES = ("left", "right", "bottom", "top")


def uniform(condition: BoundaryCondition) -> BoundarySet:
    return BoundarySet({name: condition for name in PATCHES})


def linear(centres, t):
    return 2.0 * centres[:, 0] + 3.0 * centres[:, 1]


def paraboloid(centres, t):
    return centres[:, 0] ** 2 + centres[:, 1] ** 2


class FieldTests(SimpleTestCase):
    def setUp(self):
        self.mesh = generate_rectangle_mesh(4, 4)

    def test_shape_is_checked(self):
        with self.assertRaises(ContractViolation):
            Field(self.mesh, np.zeros(5), uniform(BoundaryCondition.zero_gradient()))

    def test_every_patch_needs_a_condition(self):
        partial = BoundarySet({"left": BoundaryCondition.fixed_value(1.0)})
        with self.assertRaises(ContractViolation):
            Field(self.mesh, np.zeros(self.mesh.n_cells), partial)

    def test_fixed_gradient_extrapolates(self):
        bcs = uniform(BoundaryCondition.fixed_gradient(2.0))
        field = Field(self.mesh, np.ones(self.mesh.n_cells), bcs)
        # Boundary faces sit half a cell (0.125) from the owner centre.
        np.testing.assert_allclose(field.boundary_values(), 1.25)


class InterpolationTests(SimpleTestCase):
    def setUp(self):
        self.mesh = generate_rectangle_mesh(8, 8)

    def test_linear_field_is_exact(self):
        values = linear(self.mesh.cell_centres, 0.0)
        field = Field(self.mesh, values, uniform(BoundaryCondition.fixed_value(linear)))

        faces = face_interp_central(field)[:, 0]

        np.testing.assert_allclose(faces, linear(self.mesh.face_centres, 0.0), atol=1e-12)

    def test_constant_field_stays_constant(self):
        field = Field(self.mesh, np.full(self.mesh.n_cells, 3.5), uniform(BoundaryCondition.zero_gradient()))
        np.testing.assert_allclose(face_interp_central(field), 3.5)

    def test_gradient_of_linear_field(self):
        values = linear(self.mesh.cell_centres, 0.0)
        field = Field(self.mesh, values, uniform(BoundaryCondition.fixed_value(linear)))

        grad = gauss_gradient(field)

        np.testing.assert_allclose(grad, np.tile([2.0, 3.0], (self.mesh.n_cells, 1)), atol=1e-10)

    def test_divergence_of_uniform_field_vanishes(self):
        w = np.array([0.7, -0.2])
        field = Field(self.mesh, np.tile(w, (self.mesh.n_cells, 1)), uniform(BoundaryCondition.fixed_value(w)))
        np.testing.assert_allclose(gauss_divergence(field), 0.0, atol=1e-12)

    def test_divergence_needs_vector(self):
        field = Field(self.mesh, np.zeros(self.mesh.n_cells), uniform(BoundaryCondition.zero_gradient()))
        with self.assertRaises(ContractViolation):
            gauss_divergence(field)


class LaplacianTests(SimpleTestCase):
    def setUp(self):
        self.mesh = generate_rectangle_mesh(10, 10)
        centres = self.mesh.cell_centres
        self.interior = np.flatnonzero(
            (centres[:, 0] > 0.1) & (centres[:, 0] < 0.9) & (centres[:, 1] > 0.1) & (centres[:, 1] < 0.9)
        )

    def test_paraboloid_interior(self):
        values = paraboloid(self.mesh.cell_centres, 0.0)
        field = Field(self.mesh, values, uniform(BoundaryCondition.fixed_value(paraboloid)))

        integrated = laplacian(field).apply(values)[:, 0]
        pointwise = integrated / self.mesh.cell_volumes

        np.testing.assert_allclose(pointwise[self.interior], 4.0, rtol=1e-9)

    def test_negative_diffusivity_rejected(self):
        with self.assertRaises(ContractViolation):
            laplacian_matrix(self.mesh, -1.0, uniform(BoundaryCondition.zero_gradient()))

    def test_linear_in_the_field(self):
        op = laplacian_matrix(self.mesh, 0.3, uniform(BoundaryCondition.fixed_value(0.0)))
        rng = np.random.default_rng(7)
        a, b = rng.standard_normal((2, self.mesh.n_cells))

        np.testing.assert_allclose(op.apply(2.0 * a - b), 2.0 * op.apply(a) - op.apply(b), atol=1e-12)

    def test_conservative_with_insulated_walls(self):
        op = laplacian_matrix(self.mesh, 1.0, uniform(BoundaryCondition.zero_gradient()))
        values = np.random.default_rng(3).standard_normal(self.mesh.n_cells)
        self.assertAlmostEqual(float(op.apply(values).sum()), 0.0, places=10)

    def test_symmetric_negative_semidefinite(self):
        op = laplacian_matrix(self.mesh, 1.0, uniform(BoundaryCondition.fixed_value(0.0)))
        dense = op.matrix.toarray()
        np.testing.assert_allclose(dense, dense.T, atol=1e-12)
        self.assertLess(np.linalg.eigvalsh(dense).max(), 0.0)


class ConvectionTests(SimpleTestCase):
    def setUp(self):
        self.mesh = generate_rectangle_mesh(6, 5)
        self.field = Field(self.mesh, np.zeros(self.mesh.n_cells), uniform(BoundaryCondition.zero_gradient()))

    def test_zero_flux_gives_zero_operator(self):
        op = convective_operator(np.zeros(self.mesh.n_faces), self.field)
        self.assertEqual(abs(op.matrix).sum(), 0.0)
        np.testing.assert_array_equal(op.source, 0.0)

    def test_only_boundary_flux_survives_summation(self):
        rng = np.random.default_rng(11)
        flux = rng.standard_normal(self.mesh.n_faces)
        values = rng.standard_normal(self.mesh.n_cells)

        total = convective_operator(flux, self.field).apply(values).sum()
        boundary = flux[self.mesh.boundary] @ values[self.mesh.owner[self.mesh.boundary]]

        self.assertAlmostEqual(float(total), float(boundary), places=10)

    def test_flux_length_checked(self):
        with self.assertRaises(ContractViolation):
            convective_operator(np.zeros(3), self.field)


class RhieChowTests(SimpleTestCase):
    def setUp(self):
        self.mesh = generate_rectangle_mesh(8, 8)
        self.pressure_bcs = uniform(BoundaryCondition.zero_gradient())

    def velocity(self, w):
        w = np.asarray(w, dtype=np.float64)
        return Field(self.mesh, np.tile(w, (self.mesh.n_cells, 1)), uniform(BoundaryCondition.fixed_value(w)))

    def test_uniform_velocity_constant_pressure(self):
        w = np.array([1.0, 0.5])
        pressure = Field(self.mesh, np.full(self.mesh.n_cells, 2.0), self.pressure_bcs)

        flux = rhie_chow_flux(self.velocity(w), pressure, np.full(self.mesh.n_cells, 4.0))

        np.testing.assert_allclose(flux, self.mesh.face_areas @ w, atol=1e-12)

    def test_checkerboard_pressure_drives_flux(self):
        i = np.arange(self.mesh.n_cells) % 8
        j = np.arange(self.mesh.n_cells) // 8
        pressure = Field(self.mesh, np.where((i + j) % 2 == 0, 1.0, -1.0), self.pressure_bcs)

        flux = rhie_chow_flux(self.velocity([0.0, 0.0]), pressure, np.ones(self.mesh.n_cells))

        self.assertGreater(np.abs(flux[: self.mesh.n_internal]).max(), 0.1)

    def test_zero_diagonal_is_singular(self):
        pressure = Field(self.mesh, np.zeros(self.mesh.n_cells), self.pressure_bcs)
        diag = np.ones(self.mesh.n_cells)
        diag[5] = 0.0

        with self.assertRaises(SingularCouplingError):
            rhie_chow_flux(self.velocity([1.0, 0.0]), pressure, diag)


class SolverTests(SimpleTestCase):
    def setUp(self):
        mesh = generate_rectangle_mesh(20, 20)
        op = laplacian_matrix(mesh, 1.0, uniform(BoundaryCondition.fixed_value(0.0)))
        self.matrix = (-op.matrix).tocsr()
        self.rhs = mesh.cell_volumes.copy()

    def test_direct_and_krylov_agree(self):
        direct = Factorization(self.matrix, "poisson").solve(self.rhs)
        iterative = solve_krylov(self.matrix, self.rhs, rtol=1e-12, symmetric=True, label="poisson")

        np.testing.assert_allclose(iterative, direct, rtol=1e-8, atol=1e-12)

    def test_singular_matrix(self):
        singular = sparse.csr_matrix((4, 4))
        with self.assertRaises(SolverError):
            Factorization(singular, "empty")

    def test_non_convergence_is_reported(self):
        with self.assertRaises(SolverError) as caught:
            solve_krylov(self.matrix, self.rhs, rtol=1e-14, maxiter=1, label="poisson")
        self.assertEqual(caught.exception.label, "poisson")
