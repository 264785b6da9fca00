"""
Test parameter paths
"""

import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from nflowkit.errors import DomainError, StructureError
from nflowkit.params import (
    ParamPath,
    ParamSegment,
    Structure,
    param_distance,
    path_sup_norm,
    perturb,
    random_path,
    steps_per_segment,
    time_correct,
    zeros_like,
)


def scalar_path(structure, durations, weights, biases, alphas=None):
    alphas = alphas or [0.0] * len(durations)
    return ParamPath(
        structure,
        tuple(
            ParamSegment(tau, [[w]], [b], alpha)
            for tau, w, b, alpha in zip(durations, weights, biases, alphas)
        ),
    )


class TestParamPath(unittest.TestCase):
    """TestParamPath"""

    def test_path_sup_norm(self):
        """test_path_sup_norm"""

        p = ParamPath(
            Structure.SEPARATION,
            (
                ParamSegment(0.5, [[1.0, -2.0], [0.5, 0.0]], [0.1, 0.2], 0.4),
                ParamSegment(0.5, np.zeros((2, 2)), [0.0, -1.5], -0.7),
            ),
        )
        self.assertEqual(path_sup_norm(p), 3.0)

        p = scalar_path(Structure.SEPARATION, [1.0], [0.1], [0.2], [-0.9])
        self.assertEqual(path_sup_norm(p), 0.9)

    @settings(max_examples=50, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        structure=st.sampled_from(list(Structure)),
    )
    def test_sup_norm_triangle_inequality(self, seed, structure):
        """test_sup_norm_triangle_inequality"""

        rng = np.random.default_rng(seed)
        dim = int(rng.integers(1, 4))
        durations = rng.uniform(0.1, 1.0, size=int(rng.integers(1, 4)))
        p = random_path(rng, structure, dim, durations, scale=2.0)
        d = random_path(rng, structure, dim, durations, alpha_range=(-1.0, 1.0))

        self.assertLessEqual(
            path_sup_norm(perturb(p, d)),
            path_sup_norm(p) + path_sup_norm(d) + 1e-12,
        )

    def test_composition_drops_alpha(self):
        """test_composition_drops_alpha"""

        p = scalar_path(Structure.COMPOSITION, [1.0], [1.0], [0.0], [0.7])
        self.assertEqual(p.segments[0].alpha, 0.0)

    def test_segment_errors(self):
        """test_segment_errors"""

        with self.assertRaises(DomainError):
            ParamSegment(0.0, [[1.0]], [0.0])
        with self.assertRaises(DomainError):
            ParamSegment(1.0, [[np.inf]], [0.0])
        with self.assertRaises(StructureError):
            ParamSegment(1.0, [[1.0, 0.0]], [0.0])
        with self.assertRaises(StructureError):
            ParamSegment(1.0, [[1.0]], [0.0, 1.0])
        with self.assertRaises(StructureError):
            ParamPath(Structure.COMPOSITION, ())
        with self.assertRaises(StructureError):
            ParamPath(
                Structure.COMPOSITION,
                (
                    ParamSegment(1.0, [[1.0]], [0.0]),
                    ParamSegment(1.0, np.eye(2), [0.0, 0.0]),
                ),
            )

    def test_segment_index(self):
        """test_segment_index"""

        p = scalar_path(Structure.COMPOSITION, [0.5, 0.25, 0.25], [0, 0, 0], [0, 0, 0])
        np.testing.assert_allclose(p.breakpoints, [0.0, 0.5, 0.75, 1.0])
        self.assertEqual(p.total_time, 1.0)
        for t, expected in [(0.0, 0), (0.5, 0), (0.6, 1), (0.75, 1), (1.0, 2)]:
            self.assertEqual(p.segment_index(t), expected)

    def test_split_at(self):
        """test_split_at"""

        p = scalar_path(Structure.COMPOSITION, [0.5, 0.5], [1.0, 2.0], [0.0, 0.0])
        head, tail = p.split_at(0.75)
        np.testing.assert_allclose(head.durations, [0.5, 0.25])
        np.testing.assert_allclose(tail.durations, [0.25])
        self.assertEqual(float(tail.segments[0].weight[0, 0]), 2.0)

        for t in (0.0, 1.0, 1.5):
            with self.assertRaises(DomainError):
                p.split_at(t)

    def test_perturb(self):
        """test_perturb"""

        p = scalar_path(Structure.SEPARATION, [1.0], [1.0], [0.5], [0.2])
        delta = scalar_path(Structure.SEPARATION, [1.0], [0.25], [-0.5], [0.1])
        observed = perturb(p, delta)
        self.assertEqual(float(observed.segments[0].weight[0, 0]), 1.25)
        self.assertEqual(float(observed.segments[0].bias[0]), 0.0)
        self.assertAlmostEqual(observed.segments[0].alpha, 0.3)

        unchanged = perturb(p, zeros_like(p)).segments[0]
        np.testing.assert_array_equal(unchanged.weight, p.segments[0].weight)
        np.testing.assert_array_equal(unchanged.bias, p.segments[0].bias)
        self.assertEqual(unchanged.alpha, p.segments[0].alpha)

        other = scalar_path(Structure.SEPARATION, [0.5, 0.5], [0, 0], [0, 0])
        with self.assertRaises(StructureError):
            perturb(p, other)

    def test_param_distance(self):
        """test_param_distance"""

        p1 = scalar_path(Structure.COMPOSITION, [1.0], [1.0], [0.0])
        p2 = scalar_path(Structure.COMPOSITION, [0.5, 0.5], [1.0, 1.5], [0.0, 0.25])
        self.assertEqual(param_distance(p1, p2), 0.5)
        self.assertEqual(param_distance(p1, p1), 0.0)

        p3 = scalar_path(Structure.COMPOSITION, [2.0], [1.0], [0.0])
        with self.assertRaises(StructureError):
            param_distance(p1, p3)

    def test_uniform(self):
        """test_uniform"""

        p = ParamPath.uniform(
            Structure.SEPARATION, 0.25, [np.eye(2)] * 3, [np.zeros(2)] * 3, [0, 0.5, 1]
        )
        self.assertEqual(len(p.segments), 3)
        self.assertEqual(p.total_time, 0.75)
        np.testing.assert_array_equal(p.durations, [0.25, 0.25, 0.25])
        self.assertEqual([s.alpha for s in p.segments], [0.0, 0.5, 1.0])

        p = ParamPath.uniform(Structure.COMPOSITION, 0.5, [[[1.0]]], [[0.0]])
        self.assertEqual(p.segments[0].alpha, 0.0)


class TestTimeCorrect(unittest.TestCase):
    """TestTimeCorrect"""

    def test_time_correct(self):
        """test_time_correct"""

        cases = [
            ([0.3, 0.7], 0.25, [0.25, 0.75], 0.05),
            ([0.30, 0.45], 0.1, [0.3, 0.5], 0.05),
            ([1.0], 0.25, [1.0], 0.0),
            ([0.5], 0.1, [0.5], 0.0),
            ([0.04], 0.1, [0.1], 0.06),
            ([0.15], 0.1, [0.2], 0.05),
        ]

        for durations, dt, expected, shift in cases:
            p = scalar_path(
                Structure.COMPOSITION, durations, [0.0] * len(durations), [0.0] * 3
            )
            corrected, max_shift = time_correct(p, dt)

            np.testing.assert_allclose(
                corrected.durations,
                expected,
                atol=1e-12,
                err_msg=(
                    "time_correct() failed.\n"
                    f"Parameters:\n  durations: {durations}\n  dt: {dt}"
                ),
            )
            self.assertAlmostEqual(max_shift, shift, places=12)
            self.assertNotIn(None, steps_per_segment(corrected, dt))

    def test_time_correct_bad_dt(self):
        """test_time_correct_bad_dt"""

        p = scalar_path(Structure.COMPOSITION, [1.0], [0.0], [0.0])
        for dt in (0.0, -0.1, float("nan")):
            with self.assertRaises(DomainError):
                time_correct(p, dt)

    @settings(max_examples=50, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        dt=st.sampled_from([0.5, 0.25, 0.125, 0.1]),
    )
    def test_time_correct_idempotent(self, seed, dt):
        """test_time_correct_idempotent"""

        rng = np.random.default_rng(seed)
        durations = rng.uniform(0.01, 1.0, size=3)
        p = random_path(rng, Structure.SEPARATION, 2, durations)

        corrected, max_shift = time_correct(p, dt)
        again, shift_again = time_correct(corrected, dt)

        self.assertLessEqual(max_shift, dt)
        np.testing.assert_array_equal(again.durations, corrected.durations)
        self.assertLessEqual(shift_again, 1e-12)


if __name__ == "__main__":
    unittest.main()
