"""
Test encoders, decoders and operator models
"""

import unittest

import numpy as np

from nflowkit.core import ChannelKind
from nflowkit.errors import StructureError
from nflowkit.network import Layer, LayerKind, Network
from nflowkit.operator import (
    BasisFrame,
    OperatorModel,
    antiderivative_dataset,
    coefficient_bound,
    decode,
    encode,
    fourier_basis,
    fourier_frame,
    grid_norm,
    operator_forward,
    relative_l2,
    truncation_error,
)


class TestFrame(unittest.TestCase):
    """TestFrame"""

    def test_fourier_orthonormal(self):
        """test_fourier_orthonormal"""

        for n, count in [(8, 7), (16, 9), (64, 9), (5, 1)]:
            basis = fourier_basis(n, count)
            gram = basis @ basis.T / n
            np.testing.assert_allclose(gram, np.eye(count), atol=1e-12)

    def test_nyquist(self):
        """test_nyquist"""

        with self.assertRaises(StructureError):
            fourier_basis(8, 9)
        with self.assertRaises(StructureError):
            fourier_frame(4, 5, 3)

    def test_not_orthonormal(self):
        """test_not_orthonormal"""

        grid = ChannelKind.grid(4)
        with self.assertRaises(StructureError):
            BasisFrame(np.ones((2, 4)), np.ones((1, 4)), grid)
        with self.assertRaises(StructureError):
            BasisFrame(np.ones((1, 4)), np.ones((1, 4)), ChannelKind.scalar())

    def test_truncated(self):
        """test_truncated"""

        frame = fourier_frame(32, 5, 3)
        self.assertEqual((frame.k, frame.m), (5, 3))
        self.assertEqual(frame.truncated(2).k, 2)
        np.testing.assert_array_equal(
            frame.truncated(2).input_basis, frame.input_basis[:2]
        )

        empty = frame.truncated(0)
        self.assertEqual((empty.k, empty.m), (0, 3))
        self.assertEqual(encode(empty, np.ones((4, 32))).shape, (0, 4))
        self.assertEqual(coefficient_bound(empty, np.ones(32)), 0.0)


class TestEncodeDecode(unittest.TestCase):
    """TestEncodeDecode"""

    def setUp(self):
        self.frame = fourier_frame(32, 7, 7)

    def test_encode(self):
        """test_encode"""

        eta = self.frame.input_basis
        cases = [
            (eta[0], [1.0, 0, 0, 0, 0, 0, 0]),
            (np.zeros(32), [0.0] * 7),
            (2 * eta[0] - 3 * eta[1], [2.0, -3.0, 0, 0, 0, 0, 0]),
        ]

        for v, expected in cases:
            observed = encode(self.frame, v)
            np.testing.assert_allclose(
                observed,
                expected,
                atol=1e-12,
                err_msg=f"encode() failed.\nExpected: {expected}\nObserved: {observed}",
            )

    def test_decode(self):
        """test_decode"""

        xi = self.frame.output_basis
        unit = np.zeros(7)
        unit[0] = 1.0
        np.testing.assert_array_equal(decode(self.frame, unit), xi[0])
        np.testing.assert_array_equal(decode(self.frame, np.zeros(7)), np.zeros(32))

        rng = np.random.default_rng(1)
        g = decode(self.frame, rng.normal(size=7))
        np.testing.assert_allclose(
            decode(self.frame, encode(self.frame, g)), g, atol=1e-12
        )

        with self.assertRaises(StructureError):
            decode(self.frame, np.zeros(6))

    def test_batches(self):
        """test_batches"""

        rng = np.random.default_rng(2)
        v = rng.normal(size=(5, 32))
        coefficients = encode(self.frame, v)
        self.assertEqual(coefficients.shape, (7, 5))
        self.assertEqual(decode(self.frame, coefficients).shape, (5, 32))
        for b in range(5):
            np.testing.assert_allclose(coefficients[:, b], encode(self.frame, v[b]))

        with self.assertRaises(StructureError):
            encode(self.frame, np.zeros(31))

    def test_parseval(self):
        """test_parseval"""

        rng = np.random.default_rng(3)
        c = rng.normal(size=7)
        v = decode(self.frame, c)
        self.assertAlmostEqual(float(grid_norm(v, 1)), float(np.linalg.norm(c)), 12)


class TestTruncation(unittest.TestCase):
    """TestTruncation"""

    def test_span_has_no_error(self):
        """test_span_has_no_error"""

        frame = fourier_frame(64, 9, 9)
        inputs, _ = antiderivative_dataset(np.random.default_rng(0), 10, 64, 4)
        self.assertLess(truncation_error(frame, inputs), 1e-12)

    def test_monotone_in_k(self):
        """test_monotone_in_k"""

        n = 64
        x = np.arange(n) / n
        samples = np.stack(
            [np.exp(np.sin(2 * np.pi * x)), 1.0 / (2.0 + np.cos(2 * np.pi * x))]
        )
        frame = fourier_frame(n, 15, 1)
        errors = [truncation_error(frame.truncated(k), samples) for k in range(16)]

        for coarse, fine in zip(errors, errors[1:]):
            self.assertLessEqual(fine, coarse + 1e-15)
        self.assertLess(errors[-1], 1e-3 * errors[0])

    def test_empty_basis(self):
        """test_empty_basis"""

        frame = fourier_frame(16, 0, 1)
        samples = np.stack([np.full(16, 2.0), np.full(16, -3.0)])
        self.assertAlmostEqual(truncation_error(frame, samples), 3.0, places=14)

    def test_coefficient_bound(self):
        """test_coefficient_bound"""

        frame = fourier_frame(16, 3, 1)
        v = 2 * frame.input_basis[0] - 5 * frame.input_basis[2]
        self.assertAlmostEqual(coefficient_bound(frame, v), 5.0, places=12)


class TestOperatorModel(unittest.TestCase):
    """TestOperatorModel"""

    def test_identity_core(self):
        """test_identity_core"""

        frame = fourier_frame(32, 5, 5)
        model = OperatorModel(frame, Network.identity(5))
        v = decode(frame, np.array([0.5, -1.0, 2.0, 0.0, 0.25]))
        np.testing.assert_allclose(operator_forward(model, v), v, atol=1e-12)

    def test_zero_readout(self):
        """test_zero_readout"""

        frame = fourier_frame(32, 5, 3)
        layer = Layer(np.eye(4), np.ones(4), LayerKind.PLAIN, gamma=0.5)
        core = Network(np.ones((4, 5)), (layer,), np.zeros((3, 4)))
        model = OperatorModel(frame, core)
        v = np.sin(2 * np.pi * np.arange(32) / 32)
        np.testing.assert_array_equal(operator_forward(model, v), np.zeros(32))

    def test_shape_checks(self):
        """test_shape_checks"""

        frame = fourier_frame(32, 5, 3)
        with self.assertRaises(StructureError):
            OperatorModel(frame, Network.identity(5))
        with self.assertRaises(StructureError):
            OperatorModel(frame, Network.identity(5, ChannelKind.grid(32)))

    def test_antiderivative_dataset(self):
        """test_antiderivative_dataset"""

        n = 64
        rng = np.random.default_rng(4)
        inputs, outputs = antiderivative_dataset(rng, 6, n, 4, amplitude=0.25)
        self.assertEqual(inputs.shape, (6, n))

        # Trapezoidal differences of u approximate v at the midpoints
        derivative = np.diff(outputs, axis=1) * n
        midpoint = 0.5 * (inputs[:, 1:] + inputs[:, :-1])
        np.testing.assert_allclose(derivative, midpoint, atol=0.05)
        np.testing.assert_allclose(outputs[:, 0], 0.0, atol=1e-15)
        np.testing.assert_allclose(np.mean(inputs, axis=1), 0.0, atol=1e-12)

        with self.assertRaises(ValueError):
            antiderivative_dataset(np.random.default_rng(4), 0, n, 4)
        with self.assertRaises(StructureError):
            antiderivative_dataset(np.random.default_rng(4), 2, 8, 4)

    def test_relative_l2(self):
        """test_relative_l2"""

        target = np.array([[3.0, 4.0], [1.0, 1.0]])
        predicted = np.array([[3.0, 4.0], [0.0, 0.0]])
        np.testing.assert_allclose(relative_l2(predicted, target, 1), [0.0, 1.0])


if __name__ == "__main__":
    unittest.main()
