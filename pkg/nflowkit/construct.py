"""
Double-width systems and the activation realized as a flow
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .core import ActivationFamily, LatentState, mix_channels
from .errors import DomainError, StructureError
from .flow import FlowProblem, integrate_reference, rk4_segment
from .params import ParamPath, ParamSegment, Structure

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DoubleWidthSegment:
    """
    One constant piece of dz/dt = D * sigma_a(A z + b) on R^d.

    Args:
        duration (float): Segment length.
        signs (np.ndarray): Diagonal of D, entries +1 or -1.
        A (np.ndarray): Shape (d, d).
        b (np.ndarray): Shape (d,).
    """

    duration: float
    signs: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if not self.duration > 0:
            raise DomainError("segment duration must be > 0, got %r" % self.duration)
        signs = np.array(self.signs, dtype=float).reshape(-1)
        if not np.all(np.isin(signs, (-1.0, 1.0))):
            raise StructureError("signs must be +1 or -1, got %s" % signs)
        d = signs.shape[0]
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float).reshape(-1)
        if A.shape != (d, d) or b.shape != (d,):
            raise StructureError(
                "A must be %dx%d and b of length %d, got %s and %s"
                % (d, d, d, A.shape, b.shape)
            )
        for value in (signs, A, b):
            value.setflags(write=False)
        object.__setattr__(self, "duration", float(self.duration))
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.signs.shape[0]


@dataclass(frozen=True)
class DoubleWidthSpec:
    """A sign-switching schedule on R^d and the activation slope a."""

    slope: float
    segments: Tuple[DoubleWidthSegment, ...]

    def __post_init__(self):
        segments = tuple(self.segments)
        if not segments:
            raise StructureError("a schedule needs at least one segment")
        dims = {segment.dim for segment in segments}
        if len(dims) != 1:
            raise StructureError("segments disagree on d: %s" % sorted(dims))
        object.__setattr__(self, "segments", segments)
        object.__setattr__(self, "slope", float(self.slope))

    @property
    def dim(self) -> int:
        return self.segments[0].dim

    @property
    def total_time(self) -> float:
        return math.fsum(segment.duration for segment in self.segments)

    @property
    def activation(self) -> ActivationFamily:
        return ActivationFamily(self.slope)

    @classmethod
    def zeros(cls, slope: float, dim: int, durations=(1.0,)) -> "DoubleWidthSpec":
        """Zero schedule, whose flow is the identity."""
        return cls(
            slope,
            tuple(
                DoubleWidthSegment(
                    duration, np.ones(dim), np.zeros((dim, dim)), np.zeros(dim)
                )
                for duration in durations
            ),
        )


@dataclass(frozen=True)
class DoubleWidthSystem:
    """
    A 2d composition path with its nonlinear lift and the readback S = (I, -I).
    """

    path: ParamPath
    slope: float
    readback: np.ndarray

    @property
    def base_dim(self) -> int:
        return self.readback.shape[0]

    def lift(self, z0: np.ndarray) -> np.ndarray:
        """z0 -> (sigma_a(z0), sigma_a(-z0)) / (1 + a), shape (2d, ...)."""
        z0 = np.asarray(z0, dtype=float)
        fam = ActivationFamily(self.slope)
        return np.concatenate([fam(z0), fam(-z0)]) / (1.0 + self.slope)

    def read(self, z_hat: np.ndarray) -> np.ndarray:
        """S z_hat = p - q."""
        return mix_channels(self.readback, np.asarray(z_hat, dtype=float))


def _row_blocks(signs: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Place row i on line i for D^i = +1 and on line d + i for D^i = -1."""
    d = signs.shape[0]
    out = np.zeros((2 * d,) + rows.shape[1:])
    for i in range(d):
        out[i if signs[i] > 0 else d + i] = rows[i]
    return out


def build_double_width(spec: DoubleWidthSpec) -> DoubleWidthSystem:
    """
    Double-width composition system whose readback follows
    dz/dt = D_t sigma_a(A_t z + b_t).

    With z_hat = (p, q) and S = (I, -I), every segment gets
    A_hat = blocks of [A^i, -A^i] and b_hat = blocks of b^i, placed on the p-row of
    coordinate i when D^i = +1 and on its q-row when D^i = -1. The other row is zero,
    so its right-hand side sigma_a(0) vanishes.

    Raises:
        DomainError: If a = -1, where the lift divides by zero.

    Returns:
        DoubleWidthSystem: The 2d path, the lift and S.
    """
    if spec.slope == -1.0:
        raise DomainError("double-width lift needs 1 + a != 0, got a = -1")
    d = spec.dim
    segments = []
    for segment in spec.segments:
        rows = np.hstack([segment.A, -segment.A])
        segments.append(
            ParamSegment(
                segment.duration,
                _row_blocks(segment.signs, rows),
                _row_blocks(segment.signs, segment.b),
            )
        )
    path = ParamPath(Structure.COMPOSITION, tuple(segments))
    readback = np.hstack([np.eye(d), -np.eye(d)])
    logger.debug("double-width system: d=%d, %d segments", d, len(segments))
    return DoubleWidthSystem(path, spec.slope, readback)


def signed_flow_trajectory(
    spec: DoubleWidthSpec, z0: np.ndarray, substeps_per_segment: int = 64
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Times and states of dz/dt = D_t sigma_a(A_t z + b_t), simulated directly."""
    if substeps_per_segment < 1:
        raise DomainError(
            "substeps_per_segment must be >= 1, got %d" % substeps_per_segment
        )
    fam = spec.activation
    z = np.asarray(z0, dtype=float)
    if z.shape[0] != spec.dim:
        raise StructureError(
            "z0 has %d entries, schedule has d=%d" % (z.shape[0], spec.dim)
        )
    times, states = [0.0], [z]
    start = 0.0
    for index, segment in enumerate(spec.segments):

        def field(y, segment=segment):
            signs = segment.signs.reshape((-1,) + (1,) * (y.ndim - 1))
            bias = segment.b.reshape((-1,) + (1,) * (y.ndim - 1))
            return signs * fam(mix_channels(segment.A, y) + bias)

        h = segment.duration / substeps_per_segment
        steps = rk4_segment(field, z, segment.duration, substeps_per_segment, index)
        for k, z in enumerate(steps):
            times.append(start + (k + 1) * h)
            states.append(z)
        start += segment.duration
    return np.array(times), states


def integrate_signed_flow(
    spec: DoubleWidthSpec, z0: np.ndarray, substeps_per_segment: int = 64
) -> np.ndarray:
    """z(T) of the signed flow, the reference for double-width readbacks."""
    return signed_flow_trajectory(spec, z0, substeps_per_segment)[1][-1]


@dataclass(frozen=True)
class ActivationFlow:
    """
    H^t, the time-t flow of dz/dt = sigma_a(z), and the time tau = ln(a) / (a - 1) at
    which H^tau(exp(-tau) w) = sigma_a(w).
    """

    slope: float
    tau: float

    def flow(self, z: np.ndarray, t: float) -> np.ndarray:
        """Closed form: exp(t) z for z > 0, exp(a t) z for z < 0."""
        z = np.asarray(z, dtype=float)
        return np.where(z > 0, math.exp(t) * z, math.exp(self.slope * t) * z)

    def apply(self, w: np.ndarray) -> np.ndarray:
        """H^tau(exp(-tau) w)."""
        return self.flow(math.exp(-self.tau) * np.asarray(w, dtype=float), self.tau)

    def check(self, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(H^tau(exp(-tau) w), sigma_a(w))."""
        return self.apply(w), ActivationFamily(self.slope)(np.asarray(w, dtype=float))


def activation_as_flow(a: float) -> ActivationFlow:
    """
    Realize sigma_a as the flow H^tau of dz/dt = sigma_a(z).

    Raises:
        DomainError: If a <= 0 or a = 1, where tau is undefined. ReLU (a = 0) has no
            such realization.
    """
    if not a > 0:
        raise DomainError("activation_as_flow needs a > 0, got %r" % a)
    if a == 1.0:
        raise DomainError("activation_as_flow needs a != 1")
    return ActivationFlow(float(a), math.log(a) / (a - 1.0))


@dataclass(frozen=True)
class UapSkeleton:
    """
    x -> R1 S G^T(H^tau(c S^T P1 x)) with c = exp(-tau) / (1 + a).

    H^tau is positively homogeneous, so the scaled lift followed by H^tau reproduces
    the double-width lift (sigma_a(P1 x), sigma_a(-P1 x)) / (1 + a).
    """

    system: DoubleWidthSystem
    activation_flow: ActivationFlow
    P1: np.ndarray
    R1: np.ndarray
    substeps_per_segment: int = 64

    @property
    def lift_scale(self) -> float:
        return math.exp(-self.activation_flow.tau) / (1.0 + self.activation_flow.slope)

    @property
    def total_time(self) -> float:
        """T' = T + tau."""
        return self.system.path.total_time + self.activation_flow.tau

    def lift(self, x: np.ndarray) -> np.ndarray:
        """The linear lift c S^T P1 x."""
        y = mix_channels(self.P1, np.asarray(x, dtype=float))
        return self.lift_scale * np.concatenate([y, -y])

    def as_path(self) -> ParamPath:
        """F^{T'} as one composition path: an H^tau segment (W = I, b = 0) then G."""
        width = 2 * self.system.base_dim
        head = ParamSegment(self.activation_flow.tau, np.eye(width), np.zeros(width))
        return ParamPath(Structure.COMPOSITION, (head,) + self.system.path.segments)

    def forward(self, x: np.ndarray) -> np.ndarray:
        flow = self.activation_flow
        z_hat = flow.flow(self.lift(x), flow.tau)
        fp = FlowProblem(
            self.system.path, LatentState(z_hat), ActivationFamily(self.system.slope)
        )
        z_hat = integrate_reference(fp, self.substeps_per_segment).data
        return mix_channels(self.R1, self.system.read(z_hat))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)


def assemble_uap_skeleton(
    spec: DoubleWidthSpec,
    P1: np.ndarray,
    R1: np.ndarray,
    require_universal_width: bool = False,
    substeps_per_segment: int = 64,
) -> UapSkeleton:
    """
    Compose the scaled lift, H^tau, the double-width flow, S and R1.

    Args:
        spec (DoubleWidthSpec): Schedule on R^d.
        P1 (np.ndarray): Shape (d, d_x).
        R1 (np.ndarray): Shape (d_y, d).
        require_universal_width (bool, optional): Also demand d >= max(2 d_x + 1, d_y).
            Defaults to False.
        substeps_per_segment (int, optional): RK4 steps per segment of G. Defaults to
            64.

    Raises:
        DomainError: If a <= 0 or a = 1.
        StructureError: If the shapes do not chain.
    """
    ActivationFamily(spec.slope).require_nonlinear()
    activation_flow = activation_as_flow(spec.slope)
    P1 = np.array(P1, dtype=float)
    R1 = np.array(R1, dtype=float)
    d = spec.dim
    if P1.ndim != 2 or P1.shape[0] != d:
        raise StructureError("P1 must map into R^%d, got shape %s" % (d, P1.shape))
    if R1.ndim != 2 or R1.shape[1] != d:
        raise StructureError("R1 must map from R^%d, got shape %s" % (d, R1.shape))
    if require_universal_width:
        needed = max(2 * P1.shape[1] + 1, R1.shape[0])
        if d < needed:
            raise StructureError(
                "universal width needs d >= %d, got d=%d" % (needed, d)
            )
    return UapSkeleton(
        build_double_width(spec), activation_flow, P1, R1, substeps_per_segment
    )
