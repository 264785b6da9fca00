"""
Finite-depth networks and operators
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Tuple

import numpy as np

from .core import ChannelKind, coupling_channels, couple, expand_bias, mix_channels
from .errors import DivergenceError, StructureError


class LayerKind(str, Enum):
    RESIDUAL = "residual"
    PLAIN = "plain"
    AFFINE = "affine"


@dataclass(frozen=True)
class Layer:
    """
    One D -> D layer.

    With p = skip * z + W z + b:
        residual: z + step * sigma_slope(p)
        plain:    sigma_gamma(scale * p)
        affine:   p

    `skip` is 0 for dense layers, whose identity term is folded into W. Convolutional
    split layers keep W = dt * K and skip = 1.
    """

    weight: Any
    bias: np.ndarray
    kind: LayerKind
    step: float = 1.0
    slope: float = 1.0
    gamma: float = 1.0
    scale: float = 1.0
    skip: float = 0.0

    def __post_init__(self):
        kind = LayerKind(self.kind)
        weight = self.weight
        if not hasattr(weight, "apply"):
            weight = np.array(weight, dtype=float)
            if weight.ndim != 2 or weight.shape[0] != weight.shape[1]:
                raise StructureError("layer W must be square, got %s" % (weight.shape,))
            weight.setflags(write=False)
        bias = np.array(self.bias, dtype=float)
        if bias.ndim == 0 or bias.shape[0] != coupling_channels(weight)[0]:
            raise StructureError("layer b does not match W")
        bias.setflags(write=False)

        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)
        for name in ("step", "slope", "gamma", "scale", "skip"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def dim(self) -> int:
        return self.bias.shape[0]

    @property
    def is_dense(self) -> bool:
        return isinstance(self.weight, np.ndarray)

    def linear(self, z: np.ndarray) -> np.ndarray:
        out = couple(self.weight, z) + expand_bias(self.bias, z)
        if self.skip != 0.0:
            out = out + self.skip * z
        return out

    def __call__(self, z: np.ndarray) -> np.ndarray:
        p = self.linear(z)
        if self.kind is LayerKind.RESIDUAL:
            return z + self.step * np.where(p >= 0, p, self.slope * p)
        if self.kind is LayerKind.PLAIN:
            u = self.scale * p
            return np.where(u >= 0, u, self.gamma * u)
        return p


@dataclass(frozen=True)
class Network:
    """
    v -> R z^L with z^0 = P v and z^l = layer_l(z^{l-1}).

    Args:
        lift (np.ndarray): P, shape (D, d_in), mixing input channels pointwise.
        layers (Tuple[Layer, ...]): The D -> D layers.
        readout (np.ndarray): R, shape (d_out, D).
        channel_kind (ChannelKind, optional): Kind of the latent channels.
        structure_kind (str, optional): 'resnet' or 'plain'. Defaults to 'plain'.
        slope (float, optional): The activation parameter a the network was compiled
            with. Defaults to 0.0.
    """

    lift: np.ndarray
    layers: Tuple[Layer, ...]
    readout: np.ndarray
    channel_kind: ChannelKind = field(default_factory=ChannelKind.scalar)
    structure_kind: str = "plain"
    slope: float = 0.0

    def __post_init__(self):
        lift = np.array(self.lift, dtype=float)
        readout = np.array(self.readout, dtype=float)
        if lift.ndim != 2 or readout.ndim != 2:
            raise StructureError("lift and readout must be matrices")
        width = lift.shape[0]
        if readout.shape[1] != width:
            raise StructureError(
                "readout sources %d channels, lift targets %d"
                % (readout.shape[1], width)
            )
        layers = tuple(self.layers)
        for index, layer in enumerate(layers):
            if layer.dim != width:
                raise StructureError(
                    "layer %d is %d -> %d, network width is %d"
                    % (index, layer.dim, layer.dim, width)
                )
        if self.structure_kind not in ("resnet", "plain"):
            raise StructureError("unknown structure kind: %s" % self.structure_kind)
        lift.setflags(write=False)
        readout.setflags(write=False)
        object.__setattr__(self, "lift", lift)
        object.__setattr__(self, "readout", readout)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "slope", float(self.slope))

    @classmethod
    def identity(
        cls,
        width: int,
        channel_kind: Optional[ChannelKind] = None,
        structure_kind: str = "plain",
    ) -> "Network":
        """Depth-0 network with P = R = I."""
        return cls(
            np.eye(width),
            (),
            np.eye(width),
            channel_kind or ChannelKind.scalar(),
            structure_kind,
        )

    @property
    def width(self) -> int:
        return self.lift.shape[0]

    @property
    def input_dim(self) -> int:
        return self.lift.shape[1]

    @property
    def output_dim(self) -> int:
        return self.readout.shape[0]

    @property
    def depth(self) -> int:
        return len(self.layers)

    def with_maps(
        self, lift: Optional[np.ndarray] = None, readout: Optional[np.ndarray] = None
    ) -> "Network":
        """Copy with a new lift and/or readout."""
        return Network(
            self.lift if lift is None else lift,
            self.layers,
            self.readout if readout is None else readout,
            self.channel_kind,
            self.structure_kind,
            self.slope,
        )

    def latent(self, v: np.ndarray) -> np.ndarray:
        """z^L for input v of shape (d_in, ...)."""
        v = np.asarray(v, dtype=float)
        if v.ndim == 0 or v.shape[0] != self.input_dim:
            raise StructureError(
                "input has %s leading entries, lift expects %d"
                % (v.shape[:1] or "no", self.input_dim)
            )
        if self.channel_kind.is_grid:
            grid_shape = self.channel_kind.shape
            if v.shape[v.ndim - len(grid_shape):] != grid_shape:
                raise StructureError(
                    "input grid %s does not match %s" % (v.shape[1:], grid_shape)
                )
        z = mix_channels(self.lift, v)
        for index, layer in enumerate(self.layers):
            z = layer(z)
            if not np.all(np.isfinite(z)):
                raise DivergenceError("layer", index)
        return z

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return mix_channels(self.readout, self.latent(v))


def forward(net: Network, v: np.ndarray) -> np.ndarray:
    """
    Evaluate a network on an input vector, a batch (d_in, B) or a grid stack
    (d_in, ..., *grid).

    Raises:
        StructureError: If `v` does not match the lift.
        DivergenceError: If a layer produces non-finite values, naming the layer.
    """
    return net(v)
