"""
Test cases for the experiment presets

Test cases can be run with:
    nosetests tests/test_presets.py
"""
import json
import logging
import math
import tempfile
import unittest
from pathlib import Path
from unittest.mock import patch

import numpy as np
from timebin import analytic_model, app, presets
from timebin import event_analysis as ea
from timebin.models import DataValidationError, ExperimentConfig

SMALL_RUN = ("n_pulses=20000", "mu=0.1")
EFFICIENT = ("alice.t=1", "alice.eta=1", "bob.t=1", "bob.eta=1", "alice.dark_rate=0", "bob.dark_rate=0")


class PresetTestCase(unittest.TestCase):
    """Creates a scratch directory for every test"""

    @classmethod
    def setUpClass(cls):
        """This runs once before the entire test suite"""
        app.config["TESTING"] = True
        app.logger.setLevel(logging.CRITICAL)

    def setUp(self):
        self._folder = tempfile.TemporaryDirectory()
        self.folder = Path(self._folder.name)

    def tearDown(self):
        self._folder.cleanup()

    def write_config(self, data, name="config.json") -> Path:
        path = self.folder / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path


######################################################################
#  C O N F I G U R A T I O N
######################################################################
class TestConfiguration(PresetTestCase):
    """Config files, overrides and validation"""

    def test_parse_override(self):
        """It should split dotted keys and parse JSON literals"""
        self.assertEqual(presets.parse_override("alice.eta=0.1"), (["alice", "eta"], 0.1))
        self.assertEqual(presets.parse_override("pair_mode=single"), (["pair_mode"], "single"))
        self.assertEqual(presets.parse_override("scan.mu_list=[0.02, 0.05]"), (["scan", "mu_list"], [0.02, 0.05]))
        self.assertRaises(DataValidationError, presets.parse_override, "mu")
        self.assertRaises(DataValidationError, presets.parse_override, "=0.1")

    def test_apply_overrides(self):
        """It should apply overrides to a copy in order"""
        data = {"mu": 0.05, "bob": {"eta": 0.3}}
        result = presets.apply_overrides(data, ["bob.eta=0.5", "mu=0.1", "mu=0.08", "alice.t=0.2"])
        self.assertEqual(result, {"mu": 0.08, "bob": {"eta": 0.5}, "alice": {"t": 0.2}})
        self.assertEqual(data, {"mu": 0.05, "bob": {"eta": 0.3}})
        self.assertRaises(DataValidationError, presets.apply_overrides, data, ["mu.value=1"])

    def test_seed_precedence(self):
        """It should prefer --seed over the file and the file over the default seed"""
        path = self.write_config({"seed": 5})
        self.assertEqual(presets.resolve_config(path, default_seed=9)[0].seed, 5)
        self.assertEqual(presets.resolve_config(path, seed=3, default_seed=9)[0].seed, 3)
        self.assertEqual(presets.resolve_config(None, default_seed=9)[0].seed, 9)
        self.assertEqual(presets.resolve_config(path, ["seed=7"])[0].seed, 7)

    def test_scan_section(self):
        """It should read the scan section apart from the experiment"""
        path = self.write_config({"mu": 0.1, "scan": {"points": 8, "accidentals": "shifted"}})
        config, scan = presets.resolve_config(path)
        self.assertEqual(config.mu, 0.1)
        self.assertEqual(scan.points, 8)
        self.assertEqual(scan.accidentals, ea.AccidentalMode.SHIFTED)
        self.assertEqual(scan.mu_list, presets.DEFAULT_MU_LIST)
        self.assertEqual(presets.ScanSettings.deserialize(scan.serialize()), scan)

    def test_bad_scan_section(self):
        """It should refuse unknown or invalid scan settings"""
        for section in ({"steps": 3}, {"points": 2}, {"bin_width": 0}, {"accidentals": "all"}, [1, 2]):
            self.assertRaises(DataValidationError, presets.ScanSettings.deserialize, section)

    def test_scan_section_types(self):
        """It should refuse strings for booleans and fractional point counts"""
        for section in (
            {"write_events": "false"},
            {"write_events": 0},
            {"points": 7.9},
            {"points": "7"},
            {"mu_list": "0.05"},
            {"mu_list": [0.05, "0.1"]},
            {"bin_width": True},
        ):
            with self.assertRaises(DataValidationError, msg=str(section)):
                presets.ScanSettings.deserialize(section)
        self.assertEqual(presets.ScanSettings.deserialize({"points": 7.0}).points, 7)
        self.assertFalse(presets.ScanSettings.deserialize({"write_events": False}).write_events)
        path = self.write_config({"scan": {"write_events": "false"}})
        self.assertRaises(DataValidationError, presets.resolve_config, path)
        self.assertRaises(DataValidationError, presets.resolve_config, None, ["scan.write_events=no"])

    def test_load_config_file(self):
        """It should refuse malformed JSON and non-object configurations"""
        self.assertEqual(presets.load_config_file(None), {})
        bad = self.folder / "bad.json"
        bad.write_text("{mu: ", encoding="utf-8")
        self.assertRaises(DataValidationError, presets.load_config_file, bad)
        self.assertRaises(DataValidationError, presets.load_config_file, self.write_config([1, 2]))
        self.assertRaises(OSError, presets.load_config_file, self.folder / "missing.json")

    def test_validate_config(self):
        """It should list every violated invariant of a file"""
        self.assertEqual(presets.validate_config(self.write_config({"mu": 0.1})), [])
        problems = presets.validate_config(self.write_config({"mu": 0.9, "bin_separation": 7000}))
        self.assertEqual([problem.field for problem in problems], ["bin_separation", "mu"])
        self.assertEqual(presets.validate_config(self.write_config({"mu": 0.1}), ["mu=0.9"])[0].field, "mu")

    def test_validate_malformed_config(self):
        """It should turn malformed values into a single diagnostic"""
        problems = presets.validate_config(self.write_config({"mu": "lots"}))
        self.assertEqual(len(problems), 1)
        self.assertEqual(problems[0].field, "config")
        self.assertRaises(OSError, presets.validate_config, self.folder / "missing.json")


######################################################################
#  P R E S E T   R U N S
######################################################################
class TestRunPreset(PresetTestCase):
    """Running presets end to end on small configurations"""

    def run_preset(self, preset, overrides=SMALL_RUN, seed=1, **kwargs):
        return presets.run_preset(preset, None, overrides, self.folder / preset, seed=seed, **kwargs)

    def test_unknown_preset(self):
        """It should refuse an unknown preset"""
        self.assertRaises(DataValidationError, self.run_preset, "bell")

    def test_invalid_config(self):
        """It should refuse an invalid configuration before simulating"""
        with self.assertRaises(DataValidationError) as context:
            self.run_preset("tac-histogram", ["mu=0.9"])
        self.assertIn("mu", str(context.exception))

    def test_zero_pulses(self):
        """It should refuse to simulate zero pulses"""
        with self.assertRaises(DataValidationError) as context:
            self.run_preset("sidepeak", ["n_pulses=0"])
        self.assertIn("n_pulses=0", str(context.exception))

    def test_analytic_tables(self):
        """It should write the analytic tables without simulating"""
        with patch("timebin.montecarlo_engine.simulate_run") as simulate:
            manifest = self.run_preset("analytic-tables", ["n_pulses=0", "phases.alice=3.141592653589793"])
            simulate.assert_not_called()
        names = [path.name for path in manifest.files]
        self.assertEqual(names, ["joint.csv", "visibility_curve.csv", "rates.csv", "manifest.txt"])
        joint = np.loadtxt(manifest.output_dir / "joint.csv", delimiter=",")
        self.assertEqual(joint.shape, (36, 5))
        self.assertAlmostEqual(joint[:, 4].sum(), 1.0, places=9)
        curve = np.loadtxt(manifest.output_dir / "visibility_curve.csv", delimiter=",")
        self.assertAlmostEqual(curve[10, 1], 1.1 / 1.2, places=6)
        self.assertEqual(ea.read_config_echo(manifest.output_dir / "rates.csv").n_pulses, 0)

    def test_tac_histogram(self):
        """It should write the histogram, window counts and optionally the events"""
        manifest = self.run_preset("tac-histogram", (*SMALL_RUN, "scan.write_events=true"))
        self.assertTrue(manifest.success)
        names = {path.name for path in manifest.files}
        self.assertEqual(names, {"events.txt", "tac.csv", "windows.txt", "manifest.txt"})
        summary = (manifest.output_dir / "windows.txt").read_text(encoding="utf-8")
        for key in ("central", "left_satellite", "right_satellite", "out_of_window", "starts"):
            self.assertIn(f"\n{key} = ", summary)
        echo = ea.read_config_echo(manifest.output_dir / "tac.csv")
        self.assertEqual(echo, manifest.config)
        self.assertEqual(echo.seed, 1)

    def test_reproducible_outputs(self):
        """It should write identical files for identical seeds and any chunk count"""
        first = self.run_preset("tac-histogram", (*SMALL_RUN, "n_pulses=140000"), seed=4, chunks=1)
        first_text = (first.output_dir / "tac.csv").read_text(encoding="utf-8")
        second = presets.run_preset(
            "tac-histogram", None, (*SMALL_RUN, "n_pulses=140000"), self.folder / "again", seed=4, chunks=3
        )
        self.assertEqual((second.output_dir / "tac.csv").read_text(encoding="utf-8"), first_text)

    def test_sidepeak(self):
        """It should estimate the pair probability without interferometers"""
        manifest = self.run_preset("sidepeak", ("n_pulses=50000", "mu=0.1", *EFFICIENT))
        summary = (manifest.output_dir / "ppair.txt").read_text(encoding="utf-8")
        self.assertIn("main_counts = ", summary)
        self.assertIn("ppair_corrected = ", summary)
        echo = ea.read_config_echo(manifest.output_dir / "tac.csv")
        self.assertFalse(echo.is_bell)
        self.assertEqual(manifest.config.seed, echo.seed)

    def test_bell_scan(self):
        """It should write both fringes and the fitted visibilities"""
        manifest = self.run_preset("bell-scan", ("n_pulses=4000", "mu=0.1", "scan.points=6", *EFFICIENT))
        self.assertTrue(manifest.success, manifest.message)
        fringe = np.loadtxt(manifest.output_dir / "fringe.csv", delimiter=",")
        self.assertEqual(fringe.shape, (6, 3))
        summary = (manifest.output_dir / "visibility.txt").read_text(encoding="utf-8")
        for key in ("raw_v", "net_v", "sigma_v", "twofold_v"):
            self.assertIn(f"\n{key} = ", summary)

    @patch("timebin.event_analysis.fit_fringe")
    def test_bell_scan_fit_failure(self, fit_mock):
        """It should keep the scan files and report a failed fit in the manifest"""
        fit_mock.return_value = ea.VisibilityFit.failed("not enough counts")
        manifest = self.run_preset("bell-scan", ("n_pulses=1000", "scan.points=3"))
        self.assertFalse(manifest.success)
        self.assertEqual(manifest.message, "not enough counts")
        names = [path.name for path in manifest.files]
        self.assertEqual(names, ["fringe.csv", "twofold.csv", "manifest.txt"])
        text = (manifest.output_dir / "manifest.txt").read_text(encoding="utf-8")
        self.assertIn("status = failed", text)
        self.assertIn("message = not enough counts", text)

    @patch("timebin.event_analysis.run_fringe_scan")
    def test_power_scan(self, run_mock):
        """It should write the visibility of every mu, its linear fit and the predicted trend"""

        def fringe(config, phases, chunks=1):
            visibility = analytic_model.multiphoton_visibility(config.mu).v_exact
            counts = 1000 * (1 - visibility * np.cos(phases))
            samples = [ea.FringeSample(float(p), float(c), 0.0, config.n_pulses) for p, c in zip(phases, counts)]
            return ea.FringeScan(samples, config)

        run_mock.side_effect = fringe
        manifest = self.run_preset("power-scan", (*SMALL_RUN, "scan.mu_list=[0.02, 0.06, 0.1]"))
        table = np.loadtxt(manifest.output_dir / "power.csv", delimiter=",")
        expected = [analytic_model.multiphoton_visibility(mu).v_exact for mu in (0.02, 0.06, 0.1)]
        np.testing.assert_allclose(table[:, 1], expected, atol=1e-6)
        lines = (manifest.output_dir / "power_fit.txt").read_text(encoding="utf-8").splitlines()
        summary = dict(line.split(" = ") for line in lines if not line.startswith("#"))
        self.assertAlmostEqual(float(summary["slope"]), float(summary["predicted_slope"]), places=6)
        self.assertAlmostEqual(float(summary["intercept"]), float(summary["predicted_intercept"]), places=6)
        self.assertEqual(summary["tangent_slope"], "-1")
        self.assertGreater(float(summary["slope"]), -0.95)

    def test_pair_rate_scan(self):
        """It should write one row per mean pair number"""
        manifest = self.run_preset("pair-rate-scan", (*SMALL_RUN, *EFFICIENT, "scan.mu_list=[0.05, 0.1]"))
        table = np.loadtxt(manifest.output_dir / "pair_rate.csv", delimiter=",")
        self.assertEqual(table.shape, (2, 5))
        np.testing.assert_allclose(table[:, 0], [0.05, 0.1])
        self.assertTrue(np.all(table[:, 1] > 0))

    def test_manifest(self):
        """It should list the seed, the config and every emitted file"""
        manifest = self.run_preset("analytic-tables", seed=77)
        text = (manifest.output_dir / "manifest.txt").read_text(encoding="utf-8")
        self.assertIn("preset = analytic-tables\n", text)
        self.assertIn("seed = 77\n", text)
        self.assertIn("status = ok\n", text)
        self.assertIn("file = joint.csv\n", text)
        config_line = next(line for line in text.splitlines() if line.startswith("config = "))
        self.assertEqual(ExperimentConfig.from_json(config_line[len("config = "):]), manifest.config)
        self.assertTrue(math.isfinite(manifest.duration))
