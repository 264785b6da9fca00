"""
Test run and training configuration
"""

import unittest

import numpy as np

from nflowkit.config import RunConfig, TemplateConfig, TrainConfig
from nflowkit.errors import FormatError
from nflowkit.params import Structure
from nflowkit.train import Budget


class TestRunConfig(unittest.TestCase):
    """TestRunConfig"""

    def test_from_mapping(self):
        """test_from_mapping"""

        config = RunConfig.from_mapping({"dt": 0.25, "scheme": "split"})
        self.assertEqual(config.dt, 0.25)
        self.assertEqual(config.substeps, 64)
        self.assertEqual(RunConfig.from_mapping(None), RunConfig())

        with self.assertRaises(FormatError):
            RunConfig.from_mapping({"dt": 0.25, "stepsize": 0.1})
        with self.assertRaises(FormatError):
            RunConfig.from_mapping(["dt"])

    def test_overrides(self):
        """test_overrides"""

        base = RunConfig(dt=0.5, substeps=16)
        config = base.with_overrides(dt=0.25, substeps=None, command="discretize")

        self.assertEqual(config.dt, 0.25)
        self.assertEqual(config.substeps, 16)
        self.assertEqual(config.command, "discretize")
        self.assertEqual(base.dt, 0.5)
        self.assertEqual(config.to_dict()["dt"], 0.25)

    def test_validation(self):
        """test_validation"""

        for kwargs in (
            {"substeps": 0},
            {"substeps": True},
            {"substeps": "3"},
            {"dt": 0.0},
            {"shift_tolerance": -1.0},
        ):
            with self.assertRaises(ValueError, msg=str(kwargs)):
                RunConfig(**kwargs)

        with self.assertRaises(FormatError):
            RunConfig.from_mapping({"substeps": 0})
        with self.assertRaises(ValueError):
            RunConfig().with_overrides(substeps=-4)

        config = RunConfig.from_mapping({"dt": 0.1, "shift_tolerance": 0.05})
        self.assertEqual(config.shift_tolerance, 0.05)
        self.assertEqual(config.to_dict()["shift_tolerance"], 0.05)


class TestTrainConfig(unittest.TestCase):
    """TestTrainConfig"""

    def test_from_mapping(self):
        """test_from_mapping"""

        config = TrainConfig.from_mapping(
            {
                "task": "function",
                "target": {"name": "abs", "probes": 11},
                "template": {"structure": "composition", "width": 2, "depth": 4},
                "budget": {"iterations": 5},
                "seed": 3,
                "out": "runs/abs",
            }
        )

        self.assertEqual(config.target.probes, 11)
        self.assertEqual(config.budget, Budget(iterations=5))
        template = config.template.build()
        self.assertIs(template.structure, Structure.COMPOSITION)
        self.assertEqual(config.flat()["template.width"], 2)
        self.assertEqual(config.flat()["out"], "runs/abs")

    def test_defaults(self):
        """test_defaults"""

        config = TrainConfig.from_mapping({})
        self.assertEqual(config.task, "function")
        self.assertEqual(config.template, TemplateConfig())
        self.assertIsNone(config.out)

    def test_errors(self):
        """test_errors"""

        cases = [
            {"epochs": 3},
            {"task": "classification"},
            {"target": {"name": "abs", "noise": 0.1}},
            {"template": {"structure": "spiral"}},
            {"template": "wide"},
            {"budget": {"iterations": -1}},
        ]

        for mapping in cases:
            with self.assertRaises(FormatError, msg=repr(mapping)):
                TrainConfig.from_mapping(mapping)

    def test_fit_task(self):
        """test_fit_task"""

        config = TrainConfig.from_mapping(
            {"target": {"name": "abs", "probes": 5, "low": -2.0, "high": 2.0}}
        )
        task = config.fit_task(read_states=None)
        np.testing.assert_array_equal(task.inputs, [[-2.0, -1.0, 0.0, 1.0, 2.0]])
        np.testing.assert_array_equal(task.targets, [[2.0, 1.0, 0.0, 1.0, 2.0]])

        files = TrainConfig.from_mapping(
            {"target": {"inputs": "x.csv", "targets": "y.csv"}}
        )
        task = files.fit_task(lambda name: np.full((1, 3), len(name)))
        np.testing.assert_array_equal(task.targets, np.full((1, 3), 5.0))

        with self.assertRaises(FormatError):
            TrainConfig.from_mapping({"target": {"name": "cubic"}}).fit_task(None)

    def test_operator_task(self):
        """test_operator_task"""

        config = TrainConfig.from_mapping(
            {
                "task": "operator",
                "target": {"name": "identity", "n": 32, "k": 5, "m": 5, "count": 10},
            }
        )
        task, frame = config.operator_task(read_grid_dataset=None)

        self.assertEqual((frame.k, frame.m), (5, 5))
        np.testing.assert_array_equal(task.inputs, task.outputs)
        self.assertEqual(task.inputs.shape, (10, 32))

        with self.assertRaises(FormatError):
            TrainConfig.from_mapping(
                {"task": "operator", "target": {"name": "abs"}}
            ).operator_task(None)


if __name__ == "__main__":
    unittest.main()
