import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest.mock import patch

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from adcore.exceptions import NonFiniteError
from data.storage import load_manifest
from evalcli.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, cli
from evalcli.management.commands.generate import split_seed

SMALL_CONFIG = {
    "net": {"latent_size": 8, "mlp_hidden_layers": 1,
            "mlp_hidden_units": 16},
    "optim": {"batch_size": 2, "validate_every": 1},
}


class CliTest(SimpleTestCase):
    def setUp(self):
        tmp = tempfile.TemporaryDirectory()
        self.addCleanup(tmp.cleanup)
        self.tmp = Path(tmp.name)

    def run_cli(self, *argv):
        out, err = StringIO(), StringIO()
        code = cli(list(argv), stdout=out, stderr=err)
        return code, out.getvalue(), err.getvalue()

    def generate(self, directory, train=2, val=1, test=1, domain="rope"):
        return self.run_cli("generate", "--domain", domain, "--out",
                            str(directory), "--seed", "4",
                            "--num-train", str(train), "--num-val", str(val),
                            "--num-test", str(test))

    def test_unknown_subcommand(self):
        self.assertEqual(self.run_cli()[0], EXIT_USAGE)
        self.assertEqual(self.run_cli("explode")[0], EXIT_USAGE)

    def test_unknown_flag(self):
        code, _, err = self.run_cli("eval", "--colour", "red")
        self.assertEqual(code, EXIT_USAGE)

    def test_eval_without_checkpoint(self):
        """eval sem --ckpt devolve 1 com o uso"""
        code, _, err = self.run_cli("eval", "--data", str(self.tmp))
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("--ckpt", err)

    def test_hyphenated_names(self):
        code, _, _ = self.run_cli("sweep-iters")
        self.assertEqual(code, EXIT_USAGE)
        code, _, _ = self.run_cli("viz-landscape")
        self.assertEqual(code, EXIT_USAGE)

    def test_generate_counts(self):
        code, out, _ = self.generate(self.tmp / "rope")
        self.assertEqual(code, EXIT_OK)
        manifest = load_manifest(self.tmp / "rope")
        self.assertEqual(manifest.counts, {"train": 2, "val": 1, "test": 1})
        self.assertEqual(json.loads(out)["counts"]["train"], 2)

    def test_generate_balls_without_gravity(self):
        code, _, _ = self.run_cli(
            "generate", "--domain", "balls", "--out", str(self.tmp / "b"),
            "--num-train", "1", "--num-val", "0", "--num-test", "0",
            "--gravity", "off")
        self.assertEqual(code, EXIT_OK)
        manifest = load_manifest(self.tmp / "b")
        self.assertEqual(manifest.domain, "bouncing_balls")
        self.assertFalse(manifest.generator["gravity"])

    def test_installed_apps_need_no_database(self):
        self.assertEqual(settings.DATABASES, {})
        self.assertFalse([app for app in settings.INSTALLED_APPS
                          if app.startswith("django.contrib.")])

    def test_split_seeds_differ(self):
        self.assertNotEqual(split_seed(0, "train"), split_seed(0, "val"))
        self.assertEqual(split_seed(3, "test"), split_seed(3, "test"))

    def test_missing_dataset(self):
        code, _, err = self.run_cli("eval", "--baseline", "constant_velocity",
                                    "--data", str(self.tmp / "nothing"))
        self.assertEqual(code, EXIT_DATA)
        self.assertIn("manifest", err)

    def test_unknown_split(self):
        self.generate(self.tmp / "rope")
        code, _, err = self.run_cli("eval", "--baseline", "constant_velocity",
                                    "--data", str(self.tmp / "rope"),
                                    "--split", "holdout")
        self.assertEqual(code, EXIT_DATA)
        self.assertIn("train", err)

    def test_invalid_train_config(self):
        self.generate(self.tmp / "rope")
        config = self.tmp / "bad.json"
        config.write_text(json.dumps({"optim": {"decay_steps": [5, 2]}}))
        code, _, _ = self.run_cli("train", "--data", str(self.tmp / "rope"),
                                  "--variant", "cgns_gd", "--out",
                                  str(self.tmp / "run"), "--config",
                                  str(config))
        self.assertEqual(code, EXIT_DATA)

    @patch("evalcli.management.commands.eval.evaluate")
    def test_numeric_failure(self, evaluate):
        evaluate.side_effect = NonFiniteError("rollout", step=3)
        self.generate(self.tmp / "rope")
        code, _, err = self.run_cli("eval", "--baseline", "constant_velocity",
                                    "--data", str(self.tmp / "rope"))
        self.assertEqual(code, EXIT_NUMERIC)
        self.assertIn("rollout", err)

    def test_baseline_report(self):
        self.generate(self.tmp / "rope")
        report = self.tmp / "report.json"
        code, _, _ = self.run_cli("eval", "--baseline", "constant_velocity",
                                  "--data", str(self.tmp / "rope"),
                                  "--report", str(report))
        self.assertEqual(code, EXIT_OK)
        document = json.loads(report.read_text())
        self.assertEqual(document["variant"], "constant_velocity")
        self.assertEqual(document["split"], "test")
        self.assertGreater(document["metrics"]["one_step"], 0.0)
        self.assertEqual(len(document["per_trajectory"]), 1)

    def _checkpoint(self):
        data, config = self.tmp / "rope", self.tmp / "config.json"
        config.write_text(json.dumps(SMALL_CONFIG))
        self.generate(data)
        code, out, err = self.run_cli(
            "train", "--data", str(data), "--variant", "cgns_gd", "--out",
            str(self.tmp / "run"), "--config", str(config), "--steps", "0",
            "--iterations", "1")
        self.assertEqual(code, EXIT_OK, err)
        return data, json.loads(out)["best_checkpoint"]

    def test_rollout_rejects_zero_steps(self):
        """--steps 0 e erro de uso, nao um rollout completo"""
        data, ckpt = self._checkpoint()
        code, out, err = self.run_cli("rollout", "--ckpt", ckpt, "--data",
                                      str(data), "--steps", "0")
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("--steps", err)
        self.assertEqual(out, "")

    def test_rollout_malformed_constraint_is_usage(self):
        data, ckpt = self._checkpoint()
        for flag in ("wall_x=2.0:w", "ceiling=1.0"):
            with self.subTest(flag=flag):
                code, _, err = self.run_cli("rollout", "--ckpt", ckpt,
                                            "--data", str(data), "--steps",
                                            "1", "--constraint", flag)
                self.assertEqual(code, EXIT_USAGE)
                self.assertIn("--constraint", err)

    def test_pipeline_smoke(self):
        """generate, train, eval, sweep, rollout e landscape de ponta a ponta"""
        data, run = self.tmp / "rope", self.tmp / "run"
        config = self.tmp / "config.json"
        config.write_text(json.dumps(SMALL_CONFIG))
        self.assertEqual(self.generate(data)[0], EXIT_OK)

        code, out, err = self.run_cli(
            "train", "--data", str(data), "--variant", "cgns_gd", "--out",
            str(run), "--config", str(config), "--steps", "2",
            "--iterations", "1")
        self.assertEqual(code, EXIT_OK, err)
        ckpt = json.loads(out)["best_checkpoint"]
        self.assertEqual(json.loads(out)["steps"], 2)

        code, out, err = self.run_cli("eval", "--ckpt", ckpt, "--data",
                                      str(data))
        self.assertEqual(code, EXIT_OK, err)
        metrics = json.loads(out)["metrics"]
        self.assertTrue(all(np.isfinite(v) for v in metrics.values()))

        code, out, err = self.run_cli("sweep-iters", "--ckpt", ckpt, "--data",
                                      str(data), "--n-test-list", "0", "1",
                                      "--out", str(self.tmp / "sweep"))
        self.assertEqual(code, EXIT_OK, err)
        self.assertTrue((self.tmp / "sweep" / "sweep_test.svg").exists())
        sweep = json.loads((self.tmp / "sweep" / "sweep.json").read_text())
        self.assertEqual(set(sweep["sweeps"]["test"]), {"0", "1"})

        code, out, err = self.run_cli(
            "rollout", "--ckpt", ckpt, "--data", str(data), "--steps", "3",
            "--constraint", "wall_x=2.0:w=10", "--render",
            str(self.tmp / "frames"))
        self.assertEqual(code, EXIT_OK, err)
        document = json.loads(out)
        self.assertEqual(len(document["penalty"]), 3)
        self.assertIn("unconstrained", document)
        self.assertTrue((self.tmp / "frames" / "pred_006.svg").exists())
        self.assertTrue((self.tmp / "frames" / "gt_006.svg").exists())
        self.assertFalse((self.tmp / "frames" / "gt_007.svg").exists())

        image = self.tmp / "landscape.png"
        code, out, err = self.run_cli(
            "viz-landscape", "--ckpt", ckpt, "--data", str(data), "--node",
            "1", "--range", "0.05", "--res", "3", "--out", str(image))
        self.assertEqual(code, EXIT_OK, err)
        self.assertTrue(image.exists())
        self.assertGreaterEqual(json.loads(out)["min"], 0.0)
