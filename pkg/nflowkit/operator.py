"""
Operator approximation through orthonormal truncation
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np

from .core import ChannelKind
from .errors import StructureError
from .network import Network

GRAM_TOL = 1e-10


def inner(u: np.ndarray, v: np.ndarray, grid_dim: int) -> np.ndarray:
    """Grid inner product <u, v> = mean(u * v) over the trailing grid axes."""
    axes = tuple(range(-grid_dim, 0))
    return np.mean(u * v, axis=axes)


def grid_norm(v: np.ndarray, grid_dim: int) -> np.ndarray:
    """L2 norm under mean quadrature."""
    return np.sqrt(inner(v, v, grid_dim))


def fourier_basis(n: int, count: int) -> np.ndarray:
    """
    Real Fourier basis 1, sqrt(2) cos(2 pi k x), sqrt(2) sin(2 pi k x), k = 1, 2, ...
    on the periodic grid x_i = i / n, orthonormal under mean quadrature.

    Args:
        n (int): Grid size.
        count (int): Number of basis functions.

    Raises:
        StructureError: If the requested modes reach the Nyquist frequency.

    Returns:
        np.ndarray: Array of shape (count, n).
    """
    highest = count // 2
    if count < 0 or (count > 0 and 2 * highest >= n):
        raise StructureError(
            "%d Fourier modes need n > %d grid points, got n=%d"
            % (count, 2 * highest, n)
        )
    x = np.arange(n) / n
    rows = []
    for index in range(count):
        k = (index + 1) // 2
        if index == 0:
            rows.append(np.ones(n))
        elif index % 2 == 1:
            rows.append(np.sqrt(2.0) * np.cos(2.0 * np.pi * k * x))
        else:
            rows.append(np.sqrt(2.0) * np.sin(2.0 * np.pi * k * x))
    return np.array(rows).reshape(count, n)


@dataclass(frozen=True)
class BasisFrame:
    """
    Orthonormal input basis eta_1..eta_k and output basis xi_1..xi_m on one grid.

    Args:
        input_basis (np.ndarray): Shape (k, *grid).
        output_basis (np.ndarray): Shape (m, *grid).
        grid (ChannelKind): The grid.
    """

    input_basis: np.ndarray
    output_basis: np.ndarray
    grid: ChannelKind

    def __post_init__(self):
        if not self.grid.is_grid:
            raise StructureError("a basis frame needs a grid")
        for name in ("input_basis", "output_basis"):
            basis = np.array(getattr(self, name), dtype=float)
            basis = basis.reshape((-1,) + self.grid.shape)
            gram = self._gram(basis)
            error = 0.0
            if len(basis):
                error = float(np.max(np.abs(gram - np.eye(len(basis)))))
            if error > GRAM_TOL:
                raise StructureError(
                    "%s is not orthonormal: Gram deviation %.3e" % (name, error)
                )
            basis.setflags(write=False)
            object.__setattr__(self, name, basis)

    def _gram(self, basis: np.ndarray) -> np.ndarray:
        flat = basis.reshape(len(basis), self.grid.num_points)
        return flat @ flat.T / max(flat.shape[1], 1)

    @property
    def k(self) -> int:
        return self.input_basis.shape[0]

    @property
    def m(self) -> int:
        return self.output_basis.shape[0]

    def truncated(self, k: int) -> "BasisFrame":
        """The nested frame with the first k input functions."""
        return BasisFrame(self.input_basis[:k], self.output_basis, self.grid)


def fourier_frame(n: int, k: int, m: int) -> BasisFrame:
    """Fourier input and output bases on a 1-d periodic grid of size n."""
    return BasisFrame(fourier_basis(n, k), fourier_basis(n, m), ChannelKind.grid(n))


def _check_grid(frame: BasisFrame, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    grid_shape = frame.grid.shape
    if v.ndim < len(grid_shape) or v.shape[v.ndim - len(grid_shape) :] != grid_shape:
        raise StructureError(
            "function samples %s do not match the frame grid %s" % (v.shape, grid_shape)
        )
    return v


def _analysis(basis: np.ndarray, v: np.ndarray, grid_dim: int) -> np.ndarray:
    flat_v = v.reshape(v.shape[: v.ndim - grid_dim] + (-1,))
    flat_b = basis.reshape(len(basis), int(np.prod(basis.shape[1:])))
    coefficients = flat_v @ flat_b.T / flat_b.shape[1]
    return np.moveaxis(coefficients, -1, 0)


def encode(frame: BasisFrame, v: np.ndarray) -> np.ndarray:
    """
    Coefficients c_j = <v, eta_j>.

    Args:
        frame (BasisFrame): The frame.
        v (np.ndarray): Samples of shape (*grid) or (B, *grid).

    Returns:
        np.ndarray: Shape (k,) or (k, B).
    """
    v = _check_grid(frame, v)
    return _analysis(frame.input_basis, v, frame.grid.grid_dim)


def project_output(frame: BasisFrame, u: np.ndarray) -> np.ndarray:
    """Coefficients <u, xi_i> of an output function, shape (m,) or (m, B)."""
    u = _check_grid(frame, u)
    return _analysis(frame.output_basis, u, frame.grid.grid_dim)


def decode(frame: BasisFrame, u: np.ndarray) -> np.ndarray:
    """
    Synthesis sum_i u_i xi_i.

    Args:
        frame (BasisFrame): The frame.
        u (np.ndarray): Coefficients of shape (m,) or (m, B).

    Raises:
        StructureError: If the leading length is not m.

    Returns:
        np.ndarray: Shape (*grid) or (B, *grid).
    """
    u = np.asarray(u, dtype=float)
    if u.ndim == 0 or u.shape[0] != frame.m:
        raise StructureError(
            "expected %d coefficients, got shape %s" % (frame.m, u.shape)
        )
    flat_b = frame.output_basis.reshape(frame.m, frame.grid.num_points)
    samples = np.moveaxis(u, 0, -1) @ flat_b
    return samples.reshape(u.shape[1:] + frame.grid.shape)


def synthesize_input(frame: BasisFrame, c: np.ndarray) -> np.ndarray:
    """sum_j c_j eta_j, the projection of an input onto span(eta)."""
    c = np.asarray(c, dtype=float)
    flat_b = frame.input_basis.reshape(frame.k, frame.grid.num_points)
    samples = np.moveaxis(c, 0, -1) @ flat_b
    return samples.reshape(c.shape[1:] + frame.grid.shape)


def truncation_error(frame: BasisFrame, samples: np.ndarray) -> float:
    """
    sup over samples of ||v - sum_j <v, eta_j> eta_j||, grid L2 norm.

    With k = 0 this is the largest sample norm.
    """
    samples = _check_grid(frame, samples)
    grid_dim = frame.grid.grid_dim
    if samples.ndim == grid_dim:
        samples = samples[None]
    residual = samples - synthesize_input(frame, encode(frame, samples))
    return float(np.max(grid_norm(residual, grid_dim)))


def coefficient_bound(frame: BasisFrame, samples: np.ndarray) -> float:
    """M = sup |<v, eta_j>| over samples and basis functions."""
    coefficients = encode(frame, samples)
    return float(np.max(np.abs(coefficients))) if coefficients.size else 0.0


@dataclass(frozen=True)
class OperatorModel:
    """
    R o F o P realised as decode o network o encode.

    Args:
        frame (BasisFrame): Input and output bases.
        core (Network): Scalar-channel network with d_in = k and d_out = m.
        metadata (Dict[str, Any], optional): Free-form run information, for example
            the coefficient bound M.
    """

    frame: BasisFrame
    core: Network
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.core.channel_kind.is_grid:
            raise StructureError("the core network of an operator uses scalar channels")
        if self.core.input_dim != self.frame.k or self.core.output_dim != self.frame.m:
            raise StructureError(
                "core maps %d -> %d, frame needs %d -> %d"
                % (
                    self.core.input_dim,
                    self.core.output_dim,
                    self.frame.k,
                    self.frame.m,
                )
            )


def operator_forward(model: OperatorModel, v: np.ndarray) -> np.ndarray:
    """decode(frame, forward(core, encode(frame, v)))."""
    return decode(model.frame, model.core(encode(model.frame, v)))


def relative_l2(predicted: np.ndarray, target: np.ndarray, grid_dim: int) -> np.ndarray:
    """Per-sample ||predicted - target|| / ||target||."""
    return grid_norm(predicted - target, grid_dim) / grid_norm(target, grid_dim)


def antiderivative_dataset(
    rng: np.random.Generator,
    count: int,
    n: int,
    modes: int,
    amplitude: float = 1.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Zero-mean band-limited inputs v and their antiderivatives u(x) = int_0^x v(s) ds,
    both sampled exactly on the periodic grid.

    v = sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x), k = 1..modes, so u is periodic and
    lies in the span of the first 2 * modes + 1 Fourier functions.

    Returns:
        Tuple[np.ndarray, np.ndarray]: Inputs and outputs, each of shape (count, n).
    """
    if count < 1:
        raise ValueError("count must be >= 1, got %d" % count)
    if 2 * modes >= n:
        raise StructureError("%d modes need n > %d, got %d" % (modes, 2 * modes, n))
    x = np.arange(n) / n
    a = rng.uniform(-amplitude, amplitude, size=(count, modes))
    b = rng.uniform(-amplitude, amplitude, size=(count, modes))
    inputs = np.zeros((count, n))
    outputs = np.zeros((count, n))
    for index in range(modes):
        k = index + 1
        omega = 2.0 * np.pi * k
        cos, sin = np.cos(omega * x), np.sin(omega * x)
        a_i, b_i = a[:, index : index + 1], b[:, index : index + 1]
        inputs += a_i * cos + b_i * sin
        outputs += (a_i * sin + b_i * (1.0 - cos)) / omega
    return inputs, outputs
