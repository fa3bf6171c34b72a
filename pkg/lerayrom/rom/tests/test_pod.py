import tempfile

import numpy as np
from django.test import SimpleTestCase

from lerayrom.exceptions import ContractViolation, PodError
from lerayrom.mesh import generate_rectangle_mesh
from lerayrom.rom import (
    SnapshotMatrix,
    compute_basis,
    correlation_matrix,
    cumulative_table,
    load_basis,
    projection_error,
    save_basis,
)


class PodTests(SimpleTestCase):
    def setUp(self):
        self.mesh = generate_rectangle_mesh(6, 4)
        self.volumes = self.mesh.cell_volumes
        rng = np.random.default_rng(42)
        # Five independent patterns with decaying amplitude, mixed over twelve times.
        patterns = rng.standard_normal((2 * self.mesh.n_cells, 5)) * np.array([10.0, 5.0, 2.0, 1.0, 0.1])
        self.snapshots = SnapshotMatrix(
            "v", patterns @ rng.standard_normal((5, 12)), np.linspace(0.1, 1.2, 12), self.mesh.fingerprint, 2
        )
        self.c = correlation_matrix(self.snapshots, self.volumes)

    def weights(self):
        return np.repeat(self.volumes, 2)

    def test_modes_are_orthonormal(self):
        basis = compute_basis(self.c, self.snapshots, self.volumes, mode_count=5)
        gram = basis.modes.T @ (self.weights()[:, None] * basis.modes)
        np.testing.assert_allclose(gram, np.eye(5), atol=1e-10)

    def test_projection_error_matches_discarded_energy(self):
        basis = compute_basis(self.c, self.snapshots, self.volumes, mode_count=5)
        for k in range(1, 5):
            error = projection_error(self.snapshots, basis, self.volumes, k)
            self.assertAlmostEqual(error**2 / basis.eigenvalues[k:].sum(), 1.0, places=8)

    def test_energy_is_monotone(self):
        basis = compute_basis(self.c, self.snapshots, self.volumes, energy_target=0.99)
        self.assertTrue(np.all(np.diff(basis.energy) >= -1e-15))
        self.assertAlmostEqual(basis.energy[-1], 1.0)
        self.assertGreaterEqual(basis.energy[basis.n_modes - 1], 0.99)
        self.assertLess(basis.energy[basis.n_modes - 2], 0.99)

    def test_full_energy_stops_at_rank(self):
        basis = compute_basis(self.c, self.snapshots, self.volumes, energy_target=1.0)
        self.assertEqual(basis.n_modes, 5)

    def test_too_many_modes(self):
        with self.assertRaises(PodError):
            compute_basis(self.c, self.snapshots, self.volumes, mode_count=6)

    def test_exactly_one_criterion(self):
        with self.assertRaises(ContractViolation):
            compute_basis(self.c, self.snapshots, self.volumes)
        with self.assertRaises(ContractViolation):
            compute_basis(self.c, self.snapshots, self.volumes, energy_target=0.9, mode_count=2)

    def test_vanishing_snapshots(self):
        zero = self.snapshots.with_values(np.zeros_like(self.snapshots.values))
        with self.assertRaises(PodError):
            compute_basis(correlation_matrix(zero, self.volumes), zero, self.volumes, energy_target=0.9)

    def test_projection_coefficients(self):
        basis = compute_basis(self.c, self.snapshots, self.volumes, mode_count=5)
        coefficients = basis.project(self.snapshots.values, self.volumes)
        np.testing.assert_allclose(basis.reconstruct(coefficients), self.snapshots.values, atol=1e-8)

    def test_save_and_load(self):
        basis = compute_basis(self.c, self.snapshots, self.volumes, mode_count=3)
        with tempfile.TemporaryDirectory() as tmp:
            save_basis(basis, tmp)
            loaded = load_basis(tmp, "v")

        np.testing.assert_array_equal(loaded.modes, basis.modes)
        np.testing.assert_array_equal(loaded.eigenvalues, basis.eigenvalues)
        self.assertEqual(loaded.ncomp, 2)

    def test_cumulative_table(self):
        basis = compute_basis(self.c, self.snapshots, self.volumes, mode_count=2)
        table = cumulative_table({"v": basis}, rows=4)
        self.assertEqual(table.index.tolist(), [1, 2, 3, 4])
        np.testing.assert_allclose(table["v"].to_numpy(), basis.energy[:4])
