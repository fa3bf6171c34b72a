import hashlib
import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from lerayrom.core.artifacts import LOCK_NAME, Manifest, Workspace, file_digest, output_lock
from lerayrom.exceptions import ArtifactError, MissingArtifactError, SnapshotFormatError


class ManifestTests(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.root = Path(self._tmp.name)
        self.output = self.root / "mesh" / "mesh.txt"
        self.output.parent.mkdir()
        self.output.write_text("mesh contents\n", encoding="utf-8")

    def tearDown(self):
        self._tmp.cleanup()

    def test_recorded_stage_is_current_after_reload(self):
        manifest = Manifest(self.root)
        entry = manifest.record("mesh", "abc", [self.output], {"n_cells": 4})

        self.assertEqual(entry["outputs"], {"mesh/mesh.txt": file_digest(self.output)})
        reloaded = Manifest(self.root)
        self.assertTrue(reloaded.is_current("mesh", "abc"))
        self.assertEqual(reloaded.entry("mesh")["metadata"], {"n_cells": 4})
        self.assertEqual(reloaded.outputs("mesh"), entry["outputs"])

    def test_changed_inputs_or_outputs_invalidate_stage(self):
        manifest = Manifest(self.root)
        manifest.record("mesh", "abc", [self.output])

        self.assertFalse(manifest.is_current("mesh", "def"))
        self.assertFalse(manifest.is_current("lifting", "abc"))

        self.output.write_text("edited\n", encoding="utf-8")
        self.assertFalse(manifest.is_current("mesh", "abc"))

        self.output.unlink()
        self.assertFalse(manifest.is_current("mesh", "abc"))

    def test_failed_stage_is_never_current(self):
        manifest = Manifest(self.root)
        manifest.record("mesh", "abc", [self.output])
        manifest.fail("mesh", "abc", RuntimeError("boom"))

        reloaded = Manifest(self.root)
        self.assertFalse(reloaded.is_current("mesh", "abc"))
        self.assertEqual(reloaded.entry("mesh")["metadata"], {"error": "boom"})
        self.assertEqual(reloaded.outputs("mesh"), {})

    def test_other_versions_are_ignored(self):
        (self.root / "manifest.json").write_text(json.dumps({"version": 99, "stages": {"mesh": {}}}), encoding="utf-8")
        self.assertEqual(Manifest(self.root).stages, {})

    def test_corrupt_manifest_raises(self):
        (self.root / "manifest.json").write_text("{not json", encoding="utf-8")
        with self.assertRaises(SnapshotFormatError):
            Manifest(self.root)

    def test_file_digest_is_sha256(self):
        self.assertEqual(file_digest(self.output), hashlib.sha256(b"mesh contents\n").hexdigest())


class OutputLockTests(SimpleTestCase):
    def test_second_writer_is_refused(self):
        with tempfile.TemporaryDirectory() as tmp:
            with output_lock(tmp) as path:
                self.assertTrue(path.exists())
                with self.assertRaisesMessage(ArtifactError, "is in use by process"):
                    with output_lock(tmp):
                        pass
            self.assertFalse((Path(tmp) / LOCK_NAME).exists())

    def test_lock_is_released_on_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(RuntimeError):
                with output_lock(Path(tmp) / "run"):
                    raise RuntimeError("stage failed")
            with output_lock(Path(tmp) / "run"):
                pass


class WorkspaceTests(SimpleTestCase):
    def test_layout(self):
        workspace = Workspace(Path("out"))

        self.assertEqual(workspace.mesh_path, Path("out/mesh/mesh.txt"))
        self.assertEqual(workspace.operators_path("sup1"), Path("out/operators/sup1.lrops"))
        self.assertEqual(workspace.online_dir("ppe"), Path("out/online/ppe"))
        self.assertEqual(workspace.history_path, Path("out/fom/history.csv"))

    def test_missing_artifacts_name_the_producing_command(self):
        with tempfile.TemporaryDirectory() as tmp:
            workspace = Workspace(Path(tmp))
            with self.assertRaisesMessage(MissingArtifactError, "python manage.py offline"):
                workspace.load_mesh()
            with self.assertRaises(MissingArtifactError):
                workspace.load_operators("nos")
