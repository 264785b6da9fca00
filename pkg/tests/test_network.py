"""
Test finite-depth networks
"""

import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from nflowkit.core import ChannelKind
from nflowkit.errors import DivergenceError, StructureError
from nflowkit.network import Layer, LayerKind, Network, forward


class TestLayer(unittest.TestCase):
    """TestLayer"""

    def test_layer_kinds(self):
        """test_layer_kinds"""

        weight = np.array([[1.0, 0.0], [0.0, -1.0]])
        bias = np.array([0.5, 0.0])
        z = np.array([-2.0, 3.0])

        residual = Layer(weight, bias, LayerKind.RESIDUAL, step=0.5, slope=0.5)
        plain = Layer(weight, bias, LayerKind.PLAIN, gamma=0.25, scale=2.0)
        affine = Layer(weight, bias, LayerKind.AFFINE, skip=1.0)

        # p = W z + b = (-1.5, -3.0)
        np.testing.assert_array_equal(residual(z), [-2.375, 2.25])
        np.testing.assert_array_equal(plain(z), [-0.75, -1.5])
        np.testing.assert_array_equal(affine(z), [-3.5, 0.0])

    def test_layer_shape_checks(self):
        """test_layer_shape_checks"""

        with self.assertRaises(StructureError):
            Layer(np.zeros((2, 3)), np.zeros(2), LayerKind.AFFINE)
        with self.assertRaises(StructureError):
            Layer(np.eye(2), np.zeros(3), LayerKind.AFFINE)
        with self.assertRaises(ValueError):
            Layer(np.eye(2), np.zeros(2), "mystery")


class TestNetwork(unittest.TestCase):
    """TestNetwork"""

    def test_depth_zero(self):
        """test_depth_zero"""

        lift = np.array([[1.0], [2.0], [-1.0]])
        readout = np.array([[1.0, 1.0, 1.0], [0.0, 2.0, 0.0]])
        net = Network(lift, (), readout)
        v = np.array([[1.5, -2.0]])

        np.testing.assert_array_equal(forward(net, v), readout @ lift @ v)
        self.assertEqual(net.depth, 0)
        self.assertEqual((net.input_dim, net.width, net.output_dim), (1, 3, 2))

    def test_identity_affine_layer(self):
        """test_identity_affine_layer"""

        layer = Layer(np.eye(2), np.zeros(2), LayerKind.AFFINE)
        net = Network(np.eye(2), (layer,), np.eye(2))
        v = np.array([0.25, -4.0])
        np.testing.assert_array_equal(forward(net, v), v)

    def test_split_step_layer(self):
        """test_split_step_layer"""

        # One split step with W = 0, b = 0, alpha = 1, a = 0, dt = 0.5
        layer = Layer(np.eye(1), np.zeros(1), LayerKind.PLAIN, gamma=0.5, scale=2.0)
        net = Network(np.eye(1), (layer,), np.eye(1))
        observed = forward(net, np.array([[-1.0, 1.0]]))
        np.testing.assert_array_equal(observed, [[-1.0, 2.0]])

    def test_shape_errors(self):
        """test_shape_errors"""

        with self.assertRaises(StructureError):
            Network(np.eye(2), (), np.eye(3))
        with self.assertRaises(StructureError):
            Network(np.eye(2), (Layer(np.eye(3), np.zeros(3), "affine"),), np.eye(2))
        with self.assertRaises(StructureError):
            Network(np.eye(2), (), np.eye(2), structure_kind="recurrent")
        with self.assertRaises(StructureError):
            forward(Network.identity(2), np.zeros(3))

        grid_net = Network.identity(1, ChannelKind.grid(4))
        with self.assertRaises(StructureError):
            forward(grid_net, np.zeros((1, 5)))

    def test_divergence_names_layer(self):
        """test_divergence_names_layer"""

        big = Layer(np.eye(1) * 1e200, np.zeros(1), LayerKind.AFFINE)
        net = Network(np.eye(1), (big, big, big), np.eye(1))

        with self.assertRaises(DivergenceError) as context:
            forward(net, np.array([1.0]))
        self.assertEqual(context.exception.stage, "layer")
        self.assertEqual(context.exception.index, 1)

    @settings(max_examples=30, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        factor=st.floats(min_value=0.0, max_value=8.0),
    )
    def test_positive_homogeneity(self, seed, factor):
        """test_positive_homogeneity"""

        rng = np.random.default_rng(seed)
        layers = tuple(
            Layer(
                rng.uniform(-1.0, 1.0, size=(3, 3)),
                np.zeros(3),
                LayerKind.PLAIN,
                gamma=rng.uniform(0.0, 1.0),
                scale=rng.uniform(0.5, 2.0),
            )
            for _ in range(3)
        )
        net = Network(
            rng.uniform(-1.0, 1.0, size=(3, 2)), layers, rng.uniform(-1, 1, (1, 3))
        )
        v = rng.uniform(-1.0, 1.0, size=(2, 5))

        np.testing.assert_allclose(
            forward(net, factor * v), factor * forward(net, v), rtol=1e-9, atol=1e-12
        )


if __name__ == "__main__":
    unittest.main()
