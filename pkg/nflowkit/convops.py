"""
Convolutional couplings on periodic grids
"""

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ActivationFamily, ChannelKind, LatentState
from .errors import StructureError
from .flow import FlowProblem, field_rhs, integrate_reference
from .network import Network
from .params import ParamPath, ParamSegment, Structure

KERNEL_KINDS = ("constant", "full_grid")


@dataclass(frozen=True)
class ConvKernel:
    """
    Periodic convolution kernels for every channel pair (i, j).

    With N grid points and mean quadrature:
        out_i(x) = sum_j (1 / N) sum_y K_ij(x - y) z_j(y)

    Args:
        kind (str): 'constant' (values of shape (D, D), K_ij == c_ij everywhere) or
            'full_grid' (values of shape (D, D, *grid), samples at every lag).
        values (np.ndarray): Kernel data.
        grid (ChannelKind): The grid the kernel lives on.
    """

    kind: str
    values: np.ndarray
    grid: ChannelKind

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise StructureError("unknown kernel kind: %s" % self.kind)
        if not self.grid.is_grid:
            raise StructureError("convolution kernels need a grid channel kind")
        values = np.array(self.values, dtype=float)
        if values.ndim < 2 or values.shape[0] != values.shape[1]:
            raise StructureError("kernel values must start with a D x D block")
        expected = () if self.kind == "constant" else self.grid.shape
        if values.shape[2:] != expected:
            raise StructureError(
                "kernel resolution %s does not match grid %s"
                % (values.shape[2:], expected)
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def channels(self) -> int:
        return self.values.shape[0]

    def scaled(self, factor: float) -> "ConvKernel":
        return ConvKernel(self.kind, factor * self.values, self.grid)

    def inf_norm(self) -> float:
        """max_i sum_j (1 / N) sum_y |K_ij(y)|, the sup-norm operator bound."""
        if self.kind == "constant":
            return float(np.max(np.sum(np.abs(self.values), axis=1)))
        grid_axes = tuple(range(2, self.values.ndim))
        pair_norms = np.mean(np.abs(self.values), axis=grid_axes)
        return float(np.max(np.sum(pair_norms, axis=1)))

    def apply(self, z: np.ndarray) -> np.ndarray:
        return conv_apply_array(self, z)


def _check_resolution(kernel: ConvKernel, z: np.ndarray) -> None:
    grid_shape = kernel.grid.shape
    trailing = z.shape[z.ndim - len(grid_shape) :]
    if z.ndim < 1 + len(grid_shape) or trailing != grid_shape:
        raise StructureError(
            "state grid %s does not match kernel grid %s" % (z.shape[1:], grid_shape)
        )
    if z.shape[0] != kernel.channels:
        raise StructureError(
            "state has %d channels, kernel has %d" % (z.shape[0], kernel.channels)
        )


def grid_mean(z: np.ndarray, grid_dim: int) -> np.ndarray:
    """
    Mean over the trailing `grid_dim` axes with a correctly rounded sum, so the result
    does not depend on the order of the samples. Grid axes are kept with size 1.
    """
    lead = z.shape[: z.ndim - grid_dim]
    flat = z.reshape(lead + (-1,))
    sums = np.apply_along_axis(math.fsum, -1, flat) if flat.size else np.zeros(lead)
    return (sums / flat.shape[-1]).reshape(lead + (1,) * grid_dim)


def conv_apply_array(kernel: ConvKernel, z: np.ndarray) -> np.ndarray:
    """Periodic convolution on raw arrays of shape (D, ..., *grid)."""
    _check_resolution(kernel, z)
    d = kernel.channels
    grid_dim = kernel.grid.grid_dim
    grid_axes = tuple(range(z.ndim - grid_dim, z.ndim))
    out = np.zeros(z.shape)

    if kernel.kind == "constant":
        means = grid_mean(z, grid_dim)
        for i in range(d):
            for j in range(d):
                out[i] += kernel.values[i, j] * means[j]
        return out

    # Elementwise accumulation per lag keeps cyclic shifts exact
    n_points = kernel.grid.num_points
    for lag in np.ndindex(*kernel.grid.shape):
        rolled = np.roll(z, shift=lag, axis=grid_axes)
        for i in range(d):
            for j in range(d):
                weight = kernel.values[(i, j) + lag]
                if weight != 0.0:
                    out[i] += weight * rolled[j]
    return out / n_points


def conv_apply(K: ConvKernel, s: LatentState) -> LatentState:
    """
    Apply a convolution kernel to a grid state.

    Raises:
        StructureError: If the state's grid does not match the kernel's.
    """
    if s.kind != K.grid:
        raise StructureError(
            "state grid %s does not match kernel grid %s" % (s.kind, K.grid)
        )
    return s.with_data(conv_apply_array(K, s.data))


def emulate_dense(W: np.ndarray, grid: ChannelKind) -> ConvKernel:
    """
    Constant kernel K_ij == W_ij / |Omega| (|Omega| = 1) that reproduces dense channel
    mixing exactly on constant fields.
    """
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise StructureError("W must be a square matrix, got %s" % (W.shape,))
    return ConvKernel("constant", W, grid)


def delta_kernel(channels: int, grid: ChannelKind) -> ConvKernel:
    """Discrete delta (N at lag 0) on the diagonal: identity under mean quadrature."""
    values = np.zeros((channels, channels) + grid.shape)
    origin = (0,) * grid.grid_dim
    for i in range(channels):
        values[(i, i) + origin] = grid.num_points
    return ConvKernel("full_grid", values, grid)


def cyclic_shift(s: LatentState, shift: Sequence[int]) -> LatentState:
    """Shift every channel cyclically by `shift` grid points along each grid axis."""
    grid_dim = s.kind.grid_dim
    if len(shift) != grid_dim:
        raise StructureError("shift needs %d entries, got %d" % (grid_dim, len(shift)))
    axes = tuple(range(s.data.ndim - grid_dim, s.data.ndim))
    return s.with_data(np.roll(s.data, shift=tuple(shift), axis=axes))


def _check_conv_segment(
    segment: ParamSegment, grid: ChannelKind, allow_field_bias: bool
) -> None:
    if segment.is_dense:
        raise StructureError("convolutional flows need ConvKernel couplings")
    if segment.weight.grid != grid:
        raise StructureError("kernel grid does not match the state grid")
    if segment.bias.ndim > 1:
        if not allow_field_bias:
            raise StructureError(
                "field-valued biases need allow_field_bias=True; "
                "convolutional flows use constant-field biases"
            )
        if segment.bias.shape[1:] != grid.shape:
            raise StructureError("field bias does not match the grid")


def conv_flow_rhs(
    s: LatentState,
    segment: ParamSegment,
    structure: Structure,
    activation: ActivationFamily,
    allow_field_bias: bool = False,
) -> LatentState:
    """
    Right-hand side of a convolutional neural flow: the dense flow's right-hand side
    with channel mixing replaced by the convolution.

    Raises:
        StructureError: On dense couplings, grid mismatches, or field biases without
            `allow_field_bias`.
    """
    _check_conv_segment(segment, s.kind, allow_field_bias)
    return s.with_data(field_rhs(s.data, segment, Structure(structure), activation))


def integrate_conv_flow(
    path: ParamPath,
    initial: LatentState,
    activation: ActivationFamily,
    substeps_per_segment: int = 64,
    allow_field_bias: bool = False,
) -> LatentState:
    """Reference RK4 integration of a convolutional flow."""
    for segment in path.segments:
        _check_conv_segment(segment, initial.kind, allow_field_bias)
    return integrate_reference(
        FlowProblem(path, initial, activation), substeps_per_segment
    )


def conv_path_from_dense(path: ParamPath, grid: ChannelKind) -> ParamPath:
    """Replace every dense W by its constant-kernel emulation."""
    return ParamPath(
        path.structure,
        tuple(
            ParamSegment(
                segment.duration,
                emulate_dense(segment.weight, grid),
                segment.bias,
                segment.alpha,
            )
            for segment in path.segments
        ),
    )


def conv_network_forward(net: Network, v: np.ndarray) -> np.ndarray:
    """
    Forward pass of a network with convolutional layers.

    Raises:
        StructureError: If the network is not on a grid or the input grid differs.
    """
    if not net.channel_kind.is_grid:
        raise StructureError("convolutional networks need grid channels")
    for layer in net.layers:
        if not layer.is_dense and layer.weight.grid != net.channel_kind:
            raise StructureError("layer kernel grid does not match the network grid")
    return net(v)


