import io
import json
import tempfile
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path

import numpy as np
import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from recovery.cli import cli_main
from recovery.models import ExperimentRun
from recovery.utils.lrmx import read_lrmx
from recovery.utils.sensing import load_dataset
from recovery.utils.solvers import TRACE_COLUMNS

SMALL_PHASE = {"setting": "custom", "d1": 8, "d2": 6, "r": 2, "trials": 2, "n_values": [48, 96], "data_passes": 10}


def quiet(argv):
    with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()):
        return cli_main(argv)


class CommandTestMixin:
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.root = Path(self.tmp.name)

    def write_config(self, payload, name="config.json"):
        path = self.root / name
        path.write_text(json.dumps(payload))
        return str(path)

    def generate(self, name="dataset", **options):
        out = self.root / name
        defaults = dict(setting="custom", d1=8, d2=6, r=2, n_measurements=96, seed=3)
        defaults.update(options)
        call_command("generate", out=str(out), stdout=io.StringIO(), **defaults)
        return out


class GenerateCommandTests(CommandTestMixin, SimpleTestCase):
    def test_writes_a_loadable_dataset(self):
        out = self.generate()
        ds = load_dataset(out)
        self.assertEqual((ds.d1, ds.d2, ds.N, ds.b), (8, 6, 96, 8))
        self.assertEqual(np.linalg.matrix_rank(ds.xstar), 2)
        self.assertTrue((out / "manifest.json").exists())

    def test_same_seed_same_bytes(self):
        first = self.generate("first")
        second = self.generate("second")
        for name in ("matrices.lrmx", "y.lrmx", "xstar.lrmx"):
            self.assertEqual((first / name).read_bytes(), (second / name).read_bytes())

    def test_batch_size_must_divide(self):
        with self.assertRaises(CommandError):
            self.generate(b=7)


class SolveCommandTests(CommandTestMixin, SimpleTestCase):
    def test_svrg(self):
        dataset = self.generate()
        out = self.root / "solve"
        call_command("solve", dataset=str(dataset), rank=2, epochs=3, out=str(out), stdout=io.StringIO())
        self.assertEqual(read_lrmx(out / "u.lrmx").shape, (8, 2))
        self.assertEqual(read_lrmx(out / "v.lrmx").shape, (6, 2))
        trace = pd.read_csv(out / "trace.csv")
        self.assertEqual(list(trace.columns), TRACE_COLUMNS)
        self.assertEqual(trace["epoch"].tolist(), [0, 1, 2, 3])

    def test_gd(self):
        dataset = self.generate()
        out = self.root / "gd"
        call_command("solve", dataset=str(dataset), algorithm="gd", rank=2, epochs=5, out=str(out), stdout=io.StringIO())
        self.assertEqual(pd.read_csv(out / "trace.csv")["data_passes"].tolist(), [0.0, 1.0, 2.0, 3.0, 4.0, 5.0])

    def test_divergence_exits_with_numerical_failure(self):
        dataset = self.generate()
        with np.errstate(all="ignore"):
            status = quiet(["solve", "--dataset", str(dataset), "--rank", "2", "--eta", "1e8",
                            "--out", str(self.root / "diverged")])
        self.assertEqual(status, 2)

    def test_missing_dataset(self):
        with self.assertRaises(CommandError):
            call_command("solve", dataset=str(self.root / "absent"), rank=2, stdout=io.StringIO())

    def test_rank_defaults_to_the_stored_ground_truth(self):
        dataset = self.generate()
        self.assertEqual(json.loads((dataset / "manifest.json").read_text())["r"], 2)
        out = self.root / "solve"
        call_command("solve", dataset=str(dataset), epochs=2, out=str(out), stdout=io.StringIO())
        self.assertEqual(read_lrmx(out / "u.lrmx").shape, (8, 2))
        self.assertEqual(read_lrmx(out / "v.lrmx").shape, (6, 2))

    def test_rank_required_without_ground_truth_or_config(self):
        dataset = self.generate()
        manifest_path = dataset / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        del manifest["files"]["xstar"]
        manifest_path.write_text(json.dumps(manifest))
        with self.assertRaisesMessage(CommandError, "--rank is required"):
            call_command("solve", dataset=str(dataset), epochs=2, out=str(self.root / "solve"), stdout=io.StringIO())

    def test_rank_from_config_without_ground_truth(self):
        dataset = self.generate()
        manifest_path = dataset / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        del manifest["files"]["xstar"]
        manifest_path.write_text(json.dumps(manifest))
        config = self.write_config({"setting": "custom", "d1": 8, "d2": 6, "r": 1})
        out = self.root / "solve"
        call_command("solve", dataset=str(dataset), config=config, epochs=2, out=str(out), stdout=io.StringIO())
        self.assertEqual(read_lrmx(out / "u.lrmx").shape, (8, 1))


class ExperimentCommandTests(CommandTestMixin, SimpleTestCase):
    def test_repeated_runs_are_byte_identical(self):
        config = self.write_config(SMALL_PHASE)
        for name in ("first", "second"):
            call_command("experiment", "phase", config=config, out=str(self.root / name), stdout=io.StringIO())
        first = (self.root / "first" / "phase.csv").read_bytes()
        self.assertEqual(first, (self.root / "second" / "phase.csv").read_bytes())
        self.assertTrue(first.startswith(b"N,N_over_rdprime,prob_recovery,trials"))

    def test_seed_flag_overrides_the_config(self):
        config = self.write_config(dict(SMALL_PHASE, master_seed=1))
        call_command("experiment", "phase", config=config, seed=2, out=str(self.root / "a"), stdout=io.StringIO())
        call_command("experiment", "phase", config=self.write_config(dict(SMALL_PHASE, master_seed=2), "b.json"),
                     out=str(self.root / "b"), stdout=io.StringIO())
        self.assertEqual((self.root / "a" / "phase.csv").read_bytes(), (self.root / "b" / "phase.csv").read_bytes())

    def test_invalid_config(self):
        config = self.write_config(dict(SMALL_PHASE, noise_sigma=0.3))
        with self.assertRaises(CommandError) as caught:
            call_command("experiment", "phase", config=config, out=str(self.root), stdout=io.StringIO())
        self.assertEqual(caught.exception.returncode, 1)


class RecordedExperimentTests(CommandTestMixin, TestCase):
    def test_record_stores_every_trial(self):
        config = self.write_config(SMALL_PHASE)
        call_command("experiment", "phase", config=config, record=True, out=str(self.root), stdout=io.StringIO())
        run = ExperimentRun.objects.get()
        self.assertEqual(run.kind, "phase")
        self.assertEqual(run.trial_results.count(), 4)
        self.assertEqual(run.config["n_values"], [48, 96])
        self.assertTrue(run.csv_path.endswith("phase.csv"))


class CheckCommandTests(CommandTestMixin, SimpleTestCase):
    def run_check(self, *args, **options):
        stdout = io.StringIO()
        call_command("diagnose", *args, out=str(self.root), stdout=stdout, **options)
        return json.loads(stdout.getvalue())

    def test_rho_defaults_to_the_prescribed_regime(self):
        payload = self.run_check("rho")
        self.assertEqual(payload["check"], "rho")
        self.assertEqual(payload["inputs"]["m"], 51840)
        self.assertAlmostEqual(payload["margins"]["rho_simplified"], 5.0 / 6.0)
        self.assertTrue(payload["margins"]["prescribed_regime"])
        self.assertFalse(payload["pass"])
        self.assertEqual(json.loads((self.root / "rho.json").read_text()), payload)

    def test_rip(self):
        payload = self.run_check("rip", d1=8, d2=6, r=2, trials=20, seed=1)
        self.assertEqual(payload["inputs"]["M"], 800)
        self.assertEqual(payload["seed"], 1)
        self.assertLess(payload["margins"]["delta_hat"], 1.0)

    def test_lemmas(self):
        payload = self.run_check("lemmas", trials=20, probes=2)
        self.assertTrue(payload["pass"])
        self.assertEqual(payload["margins"]["regularizer_curvature"]["instances"], 20)
        self.assertEqual(payload["margins"]["probes"]["probes"], 2)

    def test_report_is_reproducible(self):
        first = self.run_check("gradcheck", seed=7)
        second = self.run_check("gradcheck", seed=7)
        self.assertEqual(first, second)
        self.assertTrue(first["pass"])


class CliTests(CommandTestMixin, SimpleTestCase):
    def test_gradcheck(self):
        self.assertEqual(quiet(["check", "gradcheck", "--seed", "7", "--out", str(self.root)]), 0)
        self.assertTrue(json.loads((self.root / "gradcheck.json").read_text())["pass"])

    def test_usage(self):
        self.assertEqual(quiet([]), 1)
        self.assertEqual(quiet(["--help"]), 0)

    def test_unknown_subcommand(self):
        self.assertEqual(quiet(["train"]), 1)

    def test_unknown_flag(self):
        self.assertEqual(quiet(["check", "rho", "--bogus"]), 1)

    def test_missing_config(self):
        status = quiet(["experiment", "phase", "--config", str(self.root / "missing.json"), "--out", str(self.root)])
        self.assertEqual(status, 1)

    def test_negative_seed(self):
        self.assertEqual(quiet(["check", "rho", "--seed", "-1", "--out", str(self.root)]), 1)

    def test_subcommand_help(self):
        self.assertEqual(quiet(["solve", "--help"]), 0)
