"""Benchmark acceptance runs.

These run the full pipeline twice on a bundled preset and take minutes (``ci``)
to about an hour (``paper``).  Enable them with ``LERAYROM_ACCEPTANCE=1`` and
pick the preset with ``LERAYROM_ACCEPTANCE_PRESET``.
"""

import os
import shutil
import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

import pandas as pd
from django.test import TestCase, override_settings

from lerayrom.core.artifacts import Manifest, Workspace
from lerayrom.core.config import load_config
from lerayrom.core.pipeline import run_compare, run_offline

PRESET = os.environ.get("LERAYROM_ACCEPTANCE_PRESET", "ci")

# Average relative errors reported for the benchmark (v, u, q, q_bar).
REFERENCE_ERRORS = {
    "ppe": {"v": 2.3e-2, "u": 2.4e-2, "q": 1.4e-1, "q_bar": 1.3e-1},
    "sup2": {"v": 2.6e-2, "u": 2.6e-2, "q": 1.7e-1, "q_bar": 6e-2},
}
DETERMINISTIC_OUTPUTS = (
    "table1_energy.csv",
    "fom/history.csv",
    "compare/table2_errors.csv",
    "compare/table3_coefficients.csv",
    "compare/errors_ppe.csv",
    "compare/errors_sup2.csv",
    "compare/coefficients_ppe.csv",
)


@unittest.skipUnless(os.environ.get("LERAYROM_ACCEPTANCE") == "1", "benchmark acceptance runs")
class BenchmarkAcceptanceTests(TestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls._tmp = tempfile.mkdtemp()
        with override_settings(LERAYROM_OUTPUT_DIR=""):
            base = load_config(PRESET)
        cls.roots = []
        for name in ("first", "second"):
            config = replace(base, output_dir=str(Path(cls._tmp) / name))
            run_offline(config)
            run_compare(config)
            cls.roots.append(Path(config.output_dir))
        cls.config = base
        compare = cls.roots[0] / "compare"
        cls.errors = pd.read_csv(compare / "table2_errors.csv").set_index(["mode", "field"])
        cls.coefficients = pd.read_csv(compare / "table3_coefficients.csv")
        cls.timing = pd.read_csv(compare / "timing.csv").set_index("mode")
        cls.energy = pd.read_csv(Workspace(cls.roots[0]).energy_table_path, index_col=0)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls._tmp, ignore_errors=True)
        super().tearDownClass()

    def average(self, mode, field):
        return float(self.errors.loc[(mode, field), "avg"])

    def test_mode_counts(self):
        counts = Manifest(self.roots[0]).entry("pod")["metadata"]["modes"]
        self.assertEqual(set(counts), {"v", "u", "q", "q_bar"})
        if counts != {"v": 2, "u": 2, "q": 2, "q_bar": 1}:
            self.assertGreaterEqual(self.energy.loc[2, "v"], 0.9999)
            self.assertGreaterEqual(self.energy.loc[2, "u"], 0.9999)

    def test_stabilization_ordering(self):
        for mode in ("ppe", "sup2"):
            self.assertLessEqual(self.average(mode, "v"), 0.1)
            self.assertLessEqual(self.average(mode, "u"), 0.1)
        self.assertGreaterEqual(self.average("nos", "v"), 10.0 * self.average("ppe", "v"))
        self.assertGreaterEqual(self.average("sup1", "q_bar"), 2.0 * self.average("sup2", "q_bar"))

    @unittest.skipUnless(PRESET == "paper", "reference magnitudes hold for the paper preset")
    def test_error_magnitudes(self):
        for mode, reference in REFERENCE_ERRORS.items():
            for field, expected in reference.items():
                with self.subTest(mode=mode, field=field):
                    self.assertLessEqual(self.average(mode, field), 2.0 * expected)
                    self.assertGreaterEqual(self.average(mode, field), 0.5 * expected)

    def test_coefficient_errors(self):
        for mode in ("ppe", "sup2"):
            rows = self.coefficients[self.coefficients["mode"] == mode]
            self.assertLessEqual(rows["E_cd"].min(), 0.18)
            self.assertLessEqual(rows["E_cl"].min(), 0.28)

    def test_speedup(self):
        self.assertTrue((self.timing["speedup"] >= 100.0).all(), self.timing)
        self.assertLess(self.timing.loc["ppe", "online_seconds"], self.timing.loc["sup2", "online_seconds"])

    def test_outputs_are_reproducible(self):
        first, second = self.roots
        for relative in DETERMINISTIC_OUTPUTS:
            with self.subTest(file=relative):
                self.assertEqual((first / relative).read_bytes(), (second / relative).read_bytes())
