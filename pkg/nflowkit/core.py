"""
Activation family, latent states and sup norms
"""

from dataclasses import dataclass, field
from typing import Iterable, Tuple, Union

import numpy as np

from .errors import DomainError, StructureError

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class ActivationFamily:
    """
    Leaky ReLU with negative slope `slope`.

    sigma_a(t) = t for t >= 0 and a * t for t < 0. The family contains the identity
    (a = 1) and ReLU (a = 0).

    Args:
        slope (float): The parameter a.
    """

    slope: float

    def __post_init__(self):
        if not np.isfinite(self.slope):
            raise DomainError("slope must be finite, got %r" % self.slope)
        object.__setattr__(self, "slope", float(self.slope))

    def __call__(self, t: ArrayLike) -> ArrayLike:
        return np.where(t >= 0, t, self.slope * t)

    def derivative(self, t: ArrayLike) -> ArrayLike:
        """Subgradient, taking the positive-branch slope 1 at the kink."""
        return np.where(t >= 0, 1.0, self.slope)

    @property
    def lipschitz(self) -> float:
        return max(1.0, abs(self.slope))

    def require_nonlinear(self) -> None:
        """
        Reject the identity member, which the approximation constructions exclude.

        Raises:
            DomainError: If a = 1.
        """
        if self.slope == 1.0:
            raise DomainError("slope a must differ from 1 (sigma_1 is the identity)")


@dataclass(frozen=True)
class ChannelKind:
    """
    Shape of a single latent channel.

    A scalar channel has `grid_size` 0. A grid channel holds `grid_size` samples per
    axis of a uniform periodic grid over the unit cube [0, 1)^`grid_dim`.
    """

    grid_size: int = 0
    grid_dim: int = 0

    def __post_init__(self):
        if self.grid_size < 0 or self.grid_dim < 0:
            raise StructureError(
                "grid_size and grid_dim must be nonnegative, got %d, %d"
                % (self.grid_size, self.grid_dim)
            )
        if (self.grid_size == 0) != (self.grid_dim == 0):
            raise StructureError(
                "grid channels need grid_size >= 1 and grid_dim >= 1, got %d, %d"
                % (self.grid_size, self.grid_dim)
            )

    @classmethod
    def scalar(cls) -> "ChannelKind":
        return cls()

    @classmethod
    def grid(cls, n: int, d: int = 1) -> "ChannelKind":
        if n < 1 or d < 1:
            raise StructureError(
                "grid needs n >= 1 and d >= 1, got n=%d, d=%d" % (n, d)
            )
        return cls(grid_size=n, grid_dim=d)

    @property
    def is_grid(self) -> bool:
        return self.grid_size > 0

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.grid_size,) * self.grid_dim

    @property
    def num_points(self) -> int:
        return int(np.prod(self.shape)) if self.is_grid else 1

    @property
    def spacing(self) -> float:
        return 1.0 / self.grid_size if self.is_grid else 0.0

    def points(self) -> np.ndarray:
        """Grid coordinates with shape (grid_dim, *shape)."""
        if not self.is_grid:
            raise StructureError("scalar channels have no grid points")
        axes = [np.arange(self.grid_size) / self.grid_size] * self.grid_dim
        return np.stack(np.meshgrid(*axes, indexing="ij"))


@dataclass(frozen=True)
class LatentState:
    """
    A state with D channels, stored as an array of shape (D, *batch, *kind.shape).

    The optional batch axes hold independent probes; every operation acts pointwise
    on them.

    Args:
        data (np.ndarray): Channel values.
        kind (ChannelKind, optional): Channel shape. Defaults to scalar channels.
    """

    data: np.ndarray
    kind: ChannelKind = field(default_factory=ChannelKind.scalar)

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim == 0:
            data = data.reshape(1)
        if data.shape[0] < 1:
            raise StructureError("a state needs at least one channel")
        grid_dim = self.kind.grid_dim
        trailing = data.shape[data.ndim - grid_dim :]
        if data.ndim < 1 + grid_dim or trailing != self.kind.shape:
            raise StructureError(
                "channel shape %s does not match %s" % (data.shape[1:], self.kind.shape)
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def batch_shape(self) -> Tuple[int, ...]:
        return self.data.shape[1 : self.data.ndim - self.kind.grid_dim]

    def with_data(self, data: np.ndarray) -> "LatentState":
        return LatentState(data, self.kind)


@dataclass(frozen=True)
class NormReport:
    """Sup norms of a state, a trajectory and a parameter path."""

    sup_channelwise: float = 0.0
    sup_space_time: float = 0.0
    param_sup: float = 0.0

    def __post_init__(self):
        for name in ("sup_channelwise", "sup_space_time", "param_sup"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be nonnegative" % name)


def constant_field(values: Iterable[float], kind: ChannelKind) -> LatentState:
    """
    Build a state whose channel i is the constant field values[i] * 1(x).

    Args:
        values (Iterable[float]): One value per channel.
        kind (ChannelKind): Target channel kind.

    Returns:
        LatentState: The constant-field state.
    """
    values = np.asarray(list(values), dtype=float)
    data = values.reshape((-1,) + (1,) * kind.grid_dim) * np.ones(kind.shape)
    return LatentState(data, kind)


def activate(fam: ActivationFamily, s: LatentState) -> LatentState:
    """Apply sigma_a componentwise."""
    return s.with_data(fam(s.data))


def sup_norms(s: LatentState) -> NormReport:
    """
    Sup norm of a single state over channels and samples.

    For a single time slice the channelwise and space-time norms agree.
    """
    value = float(np.max(np.abs(s.data)))
    return NormReport(sup_channelwise=value, sup_space_time=value)


def trajectory_sup_norm(states: Iterable[np.ndarray]) -> float:
    """||z||_{inf,inf}: maximum absolute value over a sequence of states."""
    return max((float(np.max(np.abs(z))) for z in states), default=0.0)


def leaky_relu_identity_check(fam: ActivationFamily, t: float) -> Tuple[float, float]:
    """
    Both sides of sigma_a(t) - sigma_a(-t) = (1 + a) * t.

    Returns:
        Tuple[float, float]: (lhs, rhs).
    """
    lhs = float(fam(t) - fam(-t))
    rhs = (1.0 + fam.slope) * t
    return lhs, float(rhs)


def matrix_inf_norm(weight: np.ndarray) -> float:
    """Operator norm induced by the vector sup norm (max absolute row sum)."""
    weight = np.asarray(weight, dtype=float)
    if weight.size == 0:
        return 0.0
    return float(np.linalg.norm(weight, ord=np.inf))


def mix_channels(weight: np.ndarray, z: np.ndarray) -> np.ndarray:
    """
    Channel mixing out_i = sum_j W_ij * z_j, applied pointwise over trailing axes.

    Every output point is computed by the same sequence of elementwise operations,
    so constant fields stay exactly constant.

    Args:
        weight (np.ndarray): Matrix of shape (D_out, D_in).
        z (np.ndarray): Array of shape (D_in, ...).

    Returns:
        np.ndarray: Array of shape (D_out, ...).
    """
    if weight.shape[1] != z.shape[0]:
        raise StructureError(
            "cannot mix %d channels with a %dx%d matrix"
            % (z.shape[0], weight.shape[0], weight.shape[1])
        )
    expand = (-1,) + (1,) * (z.ndim - 1)
    out = np.zeros((weight.shape[0],) + z.shape[1:])
    for j in range(weight.shape[1]):
        out += weight[:, j].reshape(expand) * z[j]
    return out


def couple(weight, z: np.ndarray) -> np.ndarray:
    """
    Apply a channel coupling: a dense matrix or any object with `apply(z)`, such as
    `nflowkit.convops.ConvKernel`.
    """
    if isinstance(weight, np.ndarray):
        return mix_channels(weight, z)
    return weight.apply(z)


def coupling_norm(weight) -> float:
    """||W||_inf for dense matrices, the kernel bound for couplings with `inf_norm`."""
    if isinstance(weight, np.ndarray):
        return matrix_inf_norm(weight)
    return float(weight.inf_norm())


def coupling_channels(weight) -> Tuple[int, int]:
    """(D_out, D_in) of a coupling."""
    if isinstance(weight, np.ndarray):
        return weight.shape[0], weight.shape[1]
    return weight.channels, weight.channels


def expand_bias(bias: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Broadcast a per-channel bias (constant fields) or a field bias against z."""
    if bias.ndim == 1:
        return bias.reshape((-1,) + (1,) * (z.ndim - 1))
    return bias.reshape(bias.shape[:1] + (1,) * (z.ndim - bias.ndim) + bias.shape[1:])
