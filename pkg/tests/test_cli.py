"""
Test the command-line interface
"""

import io
import math
import unittest
from contextlib import redirect_stderr, redirect_stdout
from pathlib import Path
from tempfile import TemporaryDirectory

import numpy as np
import pytest

from nflowkit.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main
from nflowkit.core import ActivationFamily
from nflowkit.io_model import read_model
from nflowkit.io_text import read_manifest, read_states, read_table, write_states
from nflowkit.io_yaml import write_path, write_yaml
from nflowkit.params import ParamPath, ParamSegment, Structure
from nflowkit.verify import CONVERGENCE_COLUMNS, CONVERGENCE_DTS


def run(argv):
    """Exit code, stdout and stderr of one invocation."""
    stdout, stderr = io.StringIO(), io.StringIO()
    with redirect_stdout(stdout), redirect_stderr(stderr):
        code = main([str(arg) for arg in argv])
    return code, stdout.getvalue(), stderr.getvalue()


class TestCli(unittest.TestCase):
    """TestCli"""

    def setUp(self):
        self.tmpdir = TemporaryDirectory()
        self.root = Path(self.tmpdir.name)

        # dz/dt = z on [0, 1]
        self.linear = self.root / "linear.yaml"
        write_path(
            self.linear,
            ParamPath(Structure.SEPARATION, (ParamSegment(1.0, [[1.0]], [0.0]),)),
            ActivationFamily(0.0),
        )
        self.composition = self.root / "composition.yaml"
        write_path(
            self.composition,
            ParamPath(
                Structure.COMPOSITION,
                (
                    ParamSegment(0.3, [[0.5]], [1.0]),
                    ParamSegment(0.45, [[0.5]], [1.0]),
                ),
            ),
            ActivationFamily(0.0),
        )
        self.states = self.root / "states.csv"
        write_states(self.states, np.array([[1.0, 2.0]]))

    def tearDown(self):
        self.tmpdir.cleanup()

    def test_integrate(self):
        """test_integrate"""

        out = self.root / "run" / "final.csv"
        code, _, _ = run(
            ["integrate", self.linear, self.states, "--out", out, "--substeps", 128]
        )

        self.assertEqual(code, EXIT_OK)
        np.testing.assert_allclose(read_states(out), [[math.e, 2 * math.e]], rtol=1e-9)
        manifest = read_manifest(out.parent / "manifest.txt")
        self.assertEqual(manifest["command"], "integrate")
        self.assertEqual(manifest["substeps"], "128")
        self.assertEqual(manifest["probes"], "2")

    def test_exit_codes(self):
        """test_exit_codes"""

        out = self.root / "final.csv"
        bad_states = self.root / "bad.csv"
        bad_states.write_text("z0\nnot-a-number\n")

        missing = self.root / "missing.yaml"
        euler = ["--scheme", "euler", "--out", out]
        no_steps = ["--out", out, "--substeps", 0]
        cases = [
            (["integrate", missing, self.states, "--out", out], EXIT_DATA),
            (["integrate", self.linear, self.states] + no_steps, EXIT_USAGE),
            (["integrate", self.linear, bad_states, "--out", out], EXIT_DATA),
            (["discretize", self.linear, "--dt", 0.25] + euler, EXIT_USAGE),
            (["discretize", self.linear, "--out", out], EXIT_USAGE),
            (["discretize", self.composition, "--dt", -1] + euler, EXIT_USAGE),
            (["verify", "--suite", "nonsense"], EXIT_USAGE),
            (["frobnicate"], EXIT_USAGE),
        ]

        for argv, expected in cases:
            code, _, _ = run(argv)
            self.assertEqual(
                code,
                expected,
                msg=(
                    "main() failed.\n"
                    f"Parameters:\n  argv: {[str(arg) for arg in argv]}\n"
                    f"Expected: {expected}\nObserved: {code}"
                ),
            )

    def test_discretize(self):
        """test_discretize"""

        out = self.root / "model" / "net.json"
        code, _, _ = run(
            ["discretize", self.composition, "--scheme", "euler", "--dt", 0.1]
            + ["--out", out]
        )

        self.assertEqual(code, EXIT_OK)
        net = read_model(out)
        self.assertEqual(net.depth, 8)
        self.assertEqual(net.structure_kind, "resnet")

        manifest = read_manifest(out.parent / "manifest.txt")
        self.assertEqual(manifest["layers"], "8")
        self.assertAlmostEqual(float(manifest["max_shift"]), 0.05, places=12)

    def test_discretize_merge(self):
        """test_discretize_merge"""

        out = self.root / "merged.json"
        code, _, _ = run(
            ["discretize", self.linear, "--scheme", "split", "--dt", 0.25, "--merge"]
            + ["--out", out]
        )

        self.assertEqual(code, EXIT_OK)
        self.assertEqual(read_model(out).depth, 1)
        manifest = read_manifest(self.root / "manifest.txt")
        self.assertEqual((manifest["layers"], manifest["merged_layers"]), ("4", "1"))

    def test_discretize_window(self):
        """test_discretize_window"""

        steep = self.root / "steep.yaml"
        write_path(
            steep,
            ParamPath(Structure.SEPARATION, (ParamSegment(1.0, [[0.0]], [0.0], 3.0),)),
            ActivationFamily(0.0),
        )
        out = self.root / "net.json"
        code, _, stderr = run(
            ["discretize", steep, "--scheme", "split", "--dt", 0.5, "--out", out]
        )
        self.assertEqual(code, EXIT_NUMERIC)
        self.assertIn("numeric error", stderr)

    def test_discretize_shift_tolerance(self):
        """test_discretize_shift_tolerance"""

        out = self.root / "net.json"
        base = ["discretize", self.composition, "--scheme", "euler", "--dt", 0.1]
        cases = [(0.01, EXIT_NUMERIC), (0.1, EXIT_OK)]

        for tolerance, expected in cases:
            code, _, _ = run(base + ["--shift-tolerance", tolerance, "--out", out])
            self.assertEqual(code, expected, msg=str(tolerance))

        code, _, _ = run(base + ["--shift-tolerance", -0.5, "--out", out])
        self.assertEqual(code, EXIT_USAGE)

    def test_invalid_run_config(self):
        """test_invalid_run_config"""

        config = self.root / "run.yaml"
        write_yaml(config, {"substeps": 0})
        code, _, _ = run(
            ["integrate", self.linear, self.states, "--out", self.root / "final.csv"]
            + ["--config", config]
        )
        self.assertEqual(code, EXIT_USAGE)

    def test_verify(self):
        """test_verify"""

        report = self.root / "report" / "verify.txt"
        code, stdout, _ = run(["verify", "--suite", "core", "--out", report])

        self.assertEqual(code, EXIT_OK)
        self.assertTrue(stdout.strip().endswith("2 checks, 0 failed"))
        self.assertEqual(report.read_text(), stdout)
        self.assertEqual(read_manifest(report.parent / "manifest.txt")["failed"], "")

    @pytest.mark.slow
    def test_verify_convergence_table(self):
        """test_verify_convergence_table"""

        report = self.root / "report.txt"
        code, _, _ = run(["verify", "--suite", "discretize", "--out", report])

        self.assertEqual(code, EXIT_OK)
        columns, rows = read_table(self.root / "convergence.csv")
        self.assertEqual(columns, list(CONVERGENCE_COLUMNS))
        self.assertEqual(len(rows), 20 * len(CONVERGENCE_DTS))

    def test_train(self):
        """test_train"""

        config = self.root / "train.yaml"
        write_yaml(
            config,
            {
                "task": "function",
                "target": {"name": "linear", "probes": 21},
                "template": {
                    "structure": "separation",
                    "width": 2,
                    "depth": 2,
                    "dt": 0.5,
                    "train_alpha": False,
                },
                "budget": {"iterations": 3},
            },
        )
        out = self.root / "train-run"
        code, stdout, _ = run(["train", config, "--out", out, "--seed", 2])

        self.assertEqual(code, EXIT_OK)
        self.assertIn("best_loss=", stdout)
        for name in ("model.json", "path.yaml", "losses.csv", "metrics.csv"):
            self.assertTrue((out / name).is_file(), msg=name)

        columns, rows = read_table(out / "losses.csv")
        self.assertEqual(columns, ["iteration", "loss"])
        self.assertEqual(len(rows), 4)
        self.assertEqual(read_manifest(out / "manifest.txt")["seed"], "2")

        code, _, _ = run(["train-operator", config, "--out", out])
        self.assertEqual(code, EXIT_USAGE)

    def test_train_needs_output(self):
        """test_train_needs_output"""

        config = self.root / "train.yaml"
        write_yaml(config, {"target": {"name": "abs"}})
        self.assertEqual(run(["train", config])[0], EXIT_USAGE)

        write_yaml(config, {"target": {"name": "abs"}, "epochs": 3})
        self.assertEqual(run(["train", config, "--out", self.root])[0], EXIT_DATA)


if __name__ == "__main__":
    unittest.main()
