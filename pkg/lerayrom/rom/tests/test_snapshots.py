import struct
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from lerayrom.exceptions import ContractViolation, FingerprintError, MissingArtifactError, SnapshotFormatError
from lerayrom.fom import FlowBoundaries, InletLaw
from lerayrom.fv import incidence
from lerayrom.mesh import generate_rectangle_mesh
from lerayrom.rom import (
    LiftingFunction,
    SnapshotMatrix,
    SnapshotSet,
    build_lifting,
    dehomogenize,
    homogenize,
    l2_inner,
    load_snapshots,
    save_snapshots,
)


def channel_boundaries(height: float = 1.0, period: float | None = 2.0) -> FlowBoundaries:
    return FlowBoundaries(
        inlet=("left",),
        outlet=("right",),
        walls=("bottom", "top"),
        inlet_law=InletLaw(height=height, amplitude=1.0, period=period),
    )


class SnapshotFileTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)
        self.mesh = generate_rectangle_mesh(5, 3)
        rng = np.random.default_rng(1)
        self.fields = rng.standard_normal((4, self.mesh.n_cells, 2))
        self.matrix = SnapshotMatrix.from_fields("v", self.fields, [0.1, 0.2, 0.3, 0.4], self.mesh.fingerprint)

    def test_layout(self):
        self.assertEqual(self.matrix.ncomp, 2)
        self.assertEqual(self.matrix.values.shape, (2 * self.mesh.n_cells, 4))
        np.testing.assert_array_equal(self.matrix.field(2), self.fields[2])
        np.testing.assert_array_equal(self.matrix.fields(), self.fields)

    def test_round_trip_is_bitwise(self):
        path = save_snapshots(self.matrix, self.dir / "v.lrsnap")
        loaded = load_snapshots(path)

        self.assertEqual(loaded.name, "v")
        self.assertEqual(loaded.fingerprint, self.mesh.fingerprint)
        np.testing.assert_array_equal(loaded.values, self.matrix.values)
        np.testing.assert_array_equal(loaded.times, self.matrix.times)
        self.assertEqual(save_snapshots(loaded, self.dir / "again.lrsnap").read_bytes(), path.read_bytes())

    def test_corrupt_magic(self):
        path = save_snapshots(self.matrix, self.dir / "v.lrsnap")
        data = bytearray(path.read_bytes())
        data[:8] = b"NOTSNAP!"
        path.write_bytes(bytes(data))

        with self.assertRaises(SnapshotFormatError):
            load_snapshots(path)

    def test_future_version(self):
        path = save_snapshots(self.matrix, self.dir / "v.lrsnap")
        data = bytearray(path.read_bytes())
        data[8:12] = struct.pack("<I", 99)
        path.write_bytes(bytes(data))

        with self.assertRaises(SnapshotFormatError):
            load_snapshots(path)

    def test_truncated_payload(self):
        path = save_snapshots(self.matrix, self.dir / "v.lrsnap")
        path.write_bytes(path.read_bytes()[:-100])

        with self.assertRaises(SnapshotFormatError):
            load_snapshots(path)

    def test_missing_file(self):
        with self.assertRaises(MissingArtifactError):
            load_snapshots(self.dir / "absent.lrsnap")

    def test_set_checks_schedule_and_mesh(self):
        q = SnapshotMatrix.from_fields("q", self.fields[:, :, 0], [0.1, 0.2, 0.3, 0.5], self.mesh.fingerprint)
        with self.assertRaises(ContractViolation):
            SnapshotSet({"v": self.matrix, "q": q}, self.mesh.cell_volumes)

        other = generate_rectangle_mesh(3, 5)
        with self.assertRaises(FingerprintError):
            self.matrix.check_mesh(other)

    def test_set_round_trip(self):
        q = SnapshotMatrix.from_fields("q", self.fields[:, :, 0], self.matrix.times, self.mesh.fingerprint)
        snapshots = SnapshotSet({"v": self.matrix, "q": q}, self.mesh.cell_volumes)
        snapshots.save(self.dir)

        loaded = SnapshotSet.load(self.dir, ("v", "q"), self.mesh)

        self.assertEqual(loaded.n_snapshots, 4)
        np.testing.assert_array_equal(loaded["q"].values, q.values)
        self.assertEqual(loaded.weights("v").size, 2 * self.mesh.n_cells)

    def test_inner_product_is_area_weighted(self):
        volumes = self.mesh.cell_volumes
        ones = np.ones((self.mesh.n_cells, 2))
        self.assertAlmostEqual(l2_inner(ones, ones, volumes), 2.0 * self.mesh.total_area)


class LiftingTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.mesh = generate_rectangle_mesh(16, 8, lx=2.0, ly=1.0)
        cls.boundaries = channel_boundaries()
        cls.lifting = build_lifting(cls.mesh, cls.boundaries)

    def test_divergence_free(self):
        self.assertLess(self.lifting.divergence, 1e-8)
        net = incidence(self.mesh) @ self.lifting.flux
        self.assertLess(np.abs(net).max(), 1e-8)

    def test_carries_the_inlet_profile(self):
        profile = self.boundaries.inlet_law.profile(self.mesh.cell_centres)
        np.testing.assert_allclose(self.lifting.values, profile, atol=0.03 * self.boundaries.inlet_law.peak_speed)

    def test_homogenize_inverts(self):
        rng = np.random.default_rng(2)
        fields = rng.standard_normal((3, self.mesh.n_cells, 2))
        matrix = SnapshotMatrix.from_fields("u", fields, [0.5, 1.0, 1.5], self.mesh.fingerprint)

        restored = dehomogenize(homogenize(matrix, self.lifting), self.lifting)

        np.testing.assert_allclose(restored.values, matrix.values, atol=1e-13)

    def test_lifted_fields_homogenize_to_zero(self):
        times = [0.5, 1.0]
        law = self.boundaries.inlet_law
        fields = np.array([law.coefficient(t) * self.lifting.values for t in times])
        matrix = SnapshotMatrix.from_fields("v", fields, times, self.mesh.fingerprint)

        np.testing.assert_allclose(homogenize(matrix, self.lifting).values, 0.0, atol=1e-14)

    def test_pressure_cannot_be_homogenized(self):
        q = SnapshotMatrix.from_fields("q", np.zeros((1, self.mesh.n_cells)), [1.0], self.mesh.fingerprint)
        with self.assertRaises(ContractViolation):
            homogenize(q, self.lifting)

    def test_snapshot_round_trip(self):
        restored = LiftingFunction.from_snapshots(self.lifting.as_snapshots(), self.boundaries.inlet_law)
        np.testing.assert_array_equal(restored.values, self.lifting.values)
        self.assertEqual(restored.v_bc(1.0), 1.0)
