import json
import shutil
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.test import TestCase, override_settings

from lerayrom.core.artifacts import Manifest, Workspace
from lerayrom.core.config import load_config
from lerayrom.core.models import PipelineRun, StageRecord
from lerayrom.core.pipeline import STAGES, run_compare, run_offline, run_online

# A 400-cell channel over 40 steps of the opening inlet ramp.
SMALL_RUN = {
    "extends": "paper",
    "mesh": {"target_cells": 400, "refinement_bias": 1.5},
    "physics": {"mu": 0.01, "alpha": 0.01, "dt": 0.005, "t_end": 0.2},
    "schedule": {"start": 0.02, "stop": 0.2, "interval": 0.02},
    "pod": {"v": 2, "u": 2, "q": 2, "q_bar": 2, "sup1_s": 1, "sup1_s_bar": 1},
    "modes": ["nos", "sup1"],
}


class OfflinePipelineTests(TestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls._tmp = tempfile.mkdtemp()
        path = Path(cls._tmp) / "small.json"
        path.write_text(json.dumps(dict(SMALL_RUN, output_dir=str(Path(cls._tmp) / "run"))), encoding="utf-8")
        cls.config_path = path
        with override_settings(LERAYROM_OUTPUT_DIR=""):
            cls.config = load_config(str(path))

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls._tmp, ignore_errors=True)
        super().tearDownClass()

    def test_stages_run_then_skip(self):
        first = run_offline(self.config)
        self.assertEqual([r.name for r in first], [spec.name for spec in STAGES])
        self.assertEqual({r.status for r in first}, {"completed"})

        pod = next(r for r in first if r.name == "pod")
        self.assertEqual(pod.metadata["modes"], {"v": 2, "u": 2, "q": 2, "q_bar": 2})
        fom = next(r for r in first if r.name == "fom")
        self.assertEqual(fom.metadata["n_steps"], 40)
        self.assertEqual(fom.metadata["n_snapshots"], 10)

        second = run_offline(self.config)
        self.assertEqual({r.status for r in second}, {"skipped"})
        self.assertEqual([r.outputs for r in second], [r.outputs for r in first])

        runs = PipelineRun.objects.filter(command="offline")
        self.assertEqual(runs.count(), 2)
        self.assertTrue(all(run.status == PipelineRun.Status.SUCCEEDED for run in runs))
        self.assertEqual(StageRecord.objects.filter(status="skipped").count(), len(STAGES))

        workspace = Workspace(self.config.output_path)
        energy = pd.read_csv(workspace.energy_table_path, index_col=0)
        self.assertEqual(list(energy.columns), ["v", "u", "q", "q_bar", "s", "s_bar"])
        self.assertEqual(list(energy.index), [1, 2, 3, 4])

        # An edited upstream output reruns its stage and everything downstream of it.
        snapshot = workspace.fom_dir / "q.lrsnap"
        snapshot.write_bytes(snapshot.read_bytes() + b"\0")
        third = {r.name: r.status for r in run_offline(self.config)}
        self.assertEqual(third["mesh"], "skipped")
        self.assertEqual(third["lifting"], "skipped")
        self.assertEqual(third["fom"], "completed")
        self.assertEqual(third["operators"], "completed")
        self.assertTrue(Manifest(workspace.root).is_current("fom", next(
            r.input_hash for r in first if r.name == "fom"
        )))

        # Online, then comparison reusing the stored online outputs.
        result = run_online(self.config, "nos")
        self.assertIsNone(result.diverged_at)
        trajectory = pd.read_csv(result.directory / "trajectory.csv")
        self.assertEqual(len(trajectory), 10)
        np.testing.assert_allclose(trajectory["t"], self.config.schedule.times(), rtol=1e-12)

        written = run_compare(self.config)
        self.assertEqual(
            set(written),
            {
                "errors_nos",
                "errors_sup1",
                "coefficients_nos",
                "coefficients_sup1",
                "table2_errors",
                "table3_coefficients",
                "timing",
            },
        )
        for path in written.values():
            self.assertTrue(Path(path).exists())
        errors = pd.read_csv(written["errors_nos"])
        self.assertEqual(len(errors), 10)
        self.assertTrue(np.isfinite(errors.drop(columns="t").to_numpy()).all())

        timing = pd.read_csv(written["timing"])
        self.assertEqual(list(timing["mode"]), ["nos", "sup1"])

    def test_offline_command_reports_stages(self):
        out = StringIO()
        with override_settings(LERAYROM_OUTPUT_DIR=str(Path(self._tmp) / "command")):
            call_command("offline", "--config", str(self.config_path), stdout=out)

        self.assertIn("fom: done in", out.getvalue())
        self.assertIn("POD modes: v=2, u=2, q=2, q_bar=2", out.getvalue())
        self.assertIn("Offline artifacts are ready.", out.getvalue())
