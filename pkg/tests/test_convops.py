"""
Test convolutional couplings
"""

import itertools
import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from nflowkit.convops import (
    ConvKernel,
    conv_apply,
    conv_flow_rhs,
    conv_network_forward,
    conv_path_from_dense,
    cyclic_shift,
    delta_kernel,
    emulate_dense,
    integrate_conv_flow,
)
from nflowkit.core import ActivationFamily, ChannelKind, LatentState, constant_field
from nflowkit.discretize import split_plain
from nflowkit.errors import StructureError
from nflowkit.flow import FlowProblem, integrate_reference
from nflowkit.network import forward
from nflowkit.params import ParamPath, ParamSegment, Structure, random_path


class TestConvApply(unittest.TestCase):
    """TestConvApply"""

    def test_constant_kernel(self):
        """test_constant_kernel"""

        for n, d in itertools.product([4, 7], [1, 2]):
            grid = ChannelKind.grid(n, d)
            kernel = emulate_dense(np.array([[1.0, 2.0], [0.0, 1.0]]), grid)
            out = conv_apply(kernel, constant_field([3.0, -1.0], grid))

            np.testing.assert_array_equal(
                out.data,
                constant_field([1.0, -1.0], grid).data,
                err_msg=f"conv_apply() failed.\nParameters:\n  n: {n}\n  d: {d}",
            )

    def test_zero_and_identity(self):
        """test_zero_and_identity"""

        grid = ChannelKind.grid(8)
        rng = np.random.default_rng(0)
        state = LatentState(rng.uniform(-1.0, 1.0, size=(2, 8)), grid)

        zero = ConvKernel("full_grid", np.zeros((2, 2, 8)), grid)
        np.testing.assert_array_equal(conv_apply(zero, state).data, np.zeros((2, 8)))
        np.testing.assert_array_equal(
            conv_apply(delta_kernel(2, grid), state).data, state.data
        )

        field = constant_field([0.7, -1.3], grid)
        np.testing.assert_array_equal(
            conv_apply(emulate_dense(np.eye(2), grid), field).data, field.data
        )

    def test_zero_mean_field(self):
        """test_zero_mean_field"""

        grid = ChannelKind.grid(16)
        x = grid.points()[0]
        waves = np.stack([np.sin(2 * np.pi * x), np.cos(4 * np.pi * x)])
        state = LatentState(waves, grid)
        kernel = emulate_dense(np.array([[1.0, -2.0], [0.5, 3.0]]), grid)
        np.testing.assert_allclose(conv_apply(kernel, state).data, 0.0, atol=1e-14)

    def test_grid_mismatch(self):
        """test_grid_mismatch"""

        kernel = emulate_dense(np.eye(1), ChannelKind.grid(4))
        with self.assertRaises(StructureError):
            conv_apply(kernel, constant_field([1.0], ChannelKind.grid(5)))
        with self.assertRaises(StructureError):
            ConvKernel("full_grid", np.zeros((1, 1, 3)), ChannelKind.grid(4))
        with self.assertRaises(StructureError):
            ConvKernel("gaussian", np.zeros((1, 1)), ChannelKind.grid(4))
        with self.assertRaises(StructureError):
            emulate_dense(np.eye(1), ChannelKind.scalar())

    @settings(max_examples=50, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        d=st.sampled_from([1, 2]),
    )
    def test_translation_equivariance(self, seed, d):
        """test_translation_equivariance"""

        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 9))
        grid = ChannelKind.grid(n, d)
        kernel = ConvKernel(
            "full_grid", rng.uniform(-1.0, 1.0, size=(2, 2) + grid.shape), grid
        )
        state = LatentState(rng.uniform(-1.0, 1.0, size=(2,) + grid.shape), grid)
        shift = [int(s) for s in rng.integers(-n, n, size=d)]

        np.testing.assert_array_equal(
            conv_apply(kernel, cyclic_shift(state, shift)).data,
            cyclic_shift(conv_apply(kernel, state), shift).data,
        )

    def test_inf_norm(self):
        """test_inf_norm"""

        grid = ChannelKind.grid(4)
        constant = emulate_dense(np.array([[1.0, -2.0], [0.5, 0.0]]), grid)
        self.assertEqual(constant.inf_norm(), 3.0)
        self.assertEqual(delta_kernel(2, grid).inf_norm(), 1.0)
        self.assertEqual(constant.scaled(0.5).inf_norm(), 1.5)
        self.assertEqual(constant.scaled(0.5).kind, constant.kind)


class TestConvFlow(unittest.TestCase):
    """TestConvFlow"""

    def test_dense_emulation(self):
        """test_dense_emulation"""

        rng = np.random.default_rng(11)
        grid = ChannelKind.grid(6, 2)
        fam = ActivationFamily(0.2)

        for structure in Structure:
            dense = random_path(rng, structure, 3, [0.3, 0.7])
            values = rng.uniform(-1.0, 1.0, size=3)

            conv = integrate_conv_flow(
                conv_path_from_dense(dense, grid), constant_field(values, grid), fam, 32
            )
            reference = integrate_reference(
                FlowProblem(dense, LatentState(values), fam), 32
            )
            for i in range(3):
                np.testing.assert_allclose(
                    conv.data[i], reference.data[i], rtol=0.0, atol=1e-12
                )

    def test_stationary(self):
        """test_stationary"""

        grid = ChannelKind.grid(5)
        kernel = ConvKernel("full_grid", np.zeros((2, 2, 5)), grid)
        path = ParamPath(
            Structure.SEPARATION, (ParamSegment(1.0, kernel, np.zeros(2)),)
        )
        state = LatentState(np.arange(10.0).reshape(2, 5), grid)
        final = integrate_conv_flow(path, state, ActivationFamily(0.0), 8)
        np.testing.assert_array_equal(final.data, state.data)

    def test_rhs_contract(self):
        """test_rhs_contract"""

        grid = ChannelKind.grid(4)
        fam = ActivationFamily(0.0)
        state = constant_field([1.0], grid)
        kernel = emulate_dense(np.array([[2.0]]), grid)

        dense_segment = ParamSegment(1.0, [[2.0]], [0.0])
        with self.assertRaises(StructureError):
            conv_flow_rhs(state, dense_segment, Structure.COMPOSITION, fam)

        field_bias = np.array([[0.0, 1.0, 0.0, -1.0]])
        segment = ParamSegment(1.0, kernel, field_bias, 0.5)
        with self.assertRaises(StructureError):
            conv_flow_rhs(state, segment, Structure.SEPARATION, fam)

        observed = conv_flow_rhs(
            state, segment, Structure.SEPARATION, fam, allow_field_bias=True
        )
        np.testing.assert_array_equal(observed.data, [[2.5, 3.5, 2.5, 1.5]])

    def test_conv_plain_network(self):
        """test_conv_plain_network"""

        rng = np.random.default_rng(5)
        grid = ChannelKind.grid(8)
        fam = ActivationFamily(0.1)
        dense = random_path(rng, Structure.SEPARATION, 2, [0.5, 0.5])
        conv = conv_path_from_dense(dense, grid)

        dense_net = split_plain(dense, 0.25, fam)
        conv_net = split_plain(conv, 0.25, fam, grid)
        values = rng.uniform(-1.0, 1.0, size=2)

        observed = conv_network_forward(conv_net, constant_field(values, grid).data)
        expected = forward(dense_net, values)
        for i in range(2):
            np.testing.assert_allclose(observed[i], expected[i], rtol=0.0, atol=1e-12)

        with self.assertRaises(StructureError):
            conv_network_forward(dense_net, values)


if __name__ == "__main__":
    unittest.main()
