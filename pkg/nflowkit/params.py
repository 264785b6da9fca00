"""
Piecewise-constant parameter paths
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import coupling_channels, coupling_norm
from .errors import DomainError, StructureError

logger = logging.getLogger(__name__)

# Slack on duration / dt ratios, absorbs decimal inputs such as 0.45 / 0.1
_RATIO_TOL = 1e-9


class Structure(str, Enum):
    COMPOSITION = "composition"
    SEPARATION = "separation"


@dataclass(frozen=True)
class ParamSegment:
    """
    Parameters held constant for `duration` time units.

    Args:
        duration (float): Segment length tau > 0.
        weight: Coupling across channels, a D x D matrix or a convolution kernel.
        bias (np.ndarray): One constant per channel, shape (D,). Field-valued biases
            of shape (D, *grid) are accepted for convolutional flows that opt in.
        alpha (float, optional): Weight of the nonlinear term in the separation
            structure. Ignored by the composition structure. Defaults to 0.0.
    """

    duration: float
    weight: Any
    bias: np.ndarray
    alpha: float = 0.0

    def __post_init__(self):
        duration = float(self.duration)
        if not (np.isfinite(duration) and duration > 0):
            raise DomainError("segment duration must be > 0, got %r" % self.duration)

        weight = self.weight
        if not hasattr(weight, "apply"):
            weight = np.array(weight, dtype=float)
            if weight.ndim != 2 or weight.shape[0] != weight.shape[1]:
                raise StructureError(
                    "W must be a square matrix, got %s" % (weight.shape,)
                )
            if not np.all(np.isfinite(weight)):
                raise DomainError("W has non-finite entries")
            weight.setflags(write=False)
        dim = coupling_channels(weight)[0]

        bias = np.array(self.bias, dtype=float)
        if bias.ndim == 0 or bias.shape[0] != dim:
            raise StructureError(
                "b must have %d entries, got shape %s" % (dim, bias.shape)
            )
        if not np.all(np.isfinite(bias)):
            raise DomainError("b has non-finite entries")
        bias.setflags(write=False)

        alpha = float(self.alpha)
        if not np.isfinite(alpha):
            raise DomainError("alpha must be finite")

        object.__setattr__(self, "duration", duration)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "alpha", alpha)

    @property
    def dim(self) -> int:
        return self.bias.shape[0]

    @property
    def is_dense(self) -> bool:
        return isinstance(self.weight, np.ndarray)

    def norm(self) -> float:
        """max(||W||_inf, ||b||_inf, |alpha|)."""
        bias_norm = float(np.max(np.abs(self.bias))) if self.bias.size else 0.0
        return max(coupling_norm(self.weight), bias_norm, abs(self.alpha))


@dataclass(frozen=True)
class ParamPath:
    """
    theta_t: a sequence of segments, segment i active on (t_{i-1}, t_i].

    Composition paths store alpha = 0 on every segment.
    """

    structure: Structure
    segments: Tuple[ParamSegment, ...]

    def __post_init__(self):
        structure = Structure(self.structure)
        segments = tuple(self.segments)
        if not segments:
            raise StructureError("a parameter path needs at least one segment")

        dims = {segment.dim for segment in segments}
        if len(dims) != 1:
            raise StructureError("segments disagree on D: %s" % sorted(dims))

        if structure is Structure.COMPOSITION:
            segments = tuple(
                replace(segment, alpha=0.0) if segment.alpha != 0.0 else segment
                for segment in segments
            )

        object.__setattr__(self, "structure", structure)
        object.__setattr__(self, "segments", segments)

    @classmethod
    def uniform(
        cls,
        structure: Structure,
        dt: float,
        weights: Sequence[np.ndarray],
        biases: Sequence[np.ndarray],
        alphas: Optional[Sequence[float]] = None,
    ) -> "ParamPath":
        """One segment of length `dt` per weight matrix."""
        if alphas is None:
            alphas = [0.0] * len(weights)
        return cls(
            structure,
            tuple(
                ParamSegment(dt, weight, bias, alpha)
                for weight, bias, alpha in zip(weights, biases, alphas)
            ),
        )

    @property
    def dim(self) -> int:
        return self.segments[0].dim

    @property
    def durations(self) -> np.ndarray:
        return np.array([segment.duration for segment in self.segments])

    @property
    def breakpoints(self) -> np.ndarray:
        """t_0 = 0, t_1, ..., t_n = T."""
        return np.concatenate([[0.0], np.cumsum(self.durations)])

    @property
    def total_time(self) -> float:
        return float(np.sum(self.durations))

    def segment_index(self, t: float) -> int:
        """Index i of the segment with t in (t_{i-1}, t_i]; t = 0 maps to 0."""
        ends = self.breakpoints[1:]
        index = int(
            np.searchsorted(ends, t - _RATIO_TOL * max(1.0, abs(t)), side="left")
        )
        return min(index, len(self.segments) - 1)

    def split_at(self, t: float) -> Tuple["ParamPath", "ParamPath"]:
        """
        Split into the paths on (0, t] and (t, T].

        Raises:
            DomainError: If t is not strictly inside (0, T).
        """
        if not (0.0 < t < self.total_time):
            raise DomainError(
                "split time must lie in (0, %r), got %r" % (self.total_time, t)
            )

        head: List[ParamSegment] = []
        tail: List[ParamSegment] = []
        start = 0.0
        for segment in self.segments:
            end = start + segment.duration
            if end <= t:
                head.append(segment)
            elif start >= t:
                tail.append(segment)
            else:
                head.append(replace(segment, duration=t - start))
                tail.append(replace(segment, duration=end - t))
            start = end

        return (
            ParamPath(self.structure, tuple(head)),
            ParamPath(self.structure, tuple(tail)),
        )


def path_sup_norm(p: ParamPath) -> float:
    """||theta||_{inf,inf}: maximum segment norm."""
    return max(segment.norm() for segment in p.segments)


def _check_same_shape(p: ParamPath, delta: ParamPath) -> None:
    if p.structure is not delta.structure:
        raise StructureError(
            "structures differ: %s vs %s" % (p.structure.value, delta.structure.value)
        )
    if len(p.segments) != len(delta.segments):
        raise StructureError(
            "segment counts differ: %d vs %d" % (len(p.segments), len(delta.segments))
        )
    if p.dim != delta.dim:
        raise StructureError("D differs: %d vs %d" % (p.dim, delta.dim))
    if not np.allclose(p.durations, delta.durations, rtol=0.0, atol=_RATIO_TOL):
        raise StructureError("segment durations differ")


def perturb(p: ParamPath, delta: ParamPath) -> ParamPath:
    """
    Entrywise sum of two paths with identical shape, keeping the durations of `p`.

    Raises:
        StructureError: If structure, segment count, D or durations differ, or if
            either path uses non-dense couplings.
    """
    _check_same_shape(p, delta)
    segments = []
    for segment, increment in zip(p.segments, delta.segments):
        if not (segment.is_dense and increment.is_dense):
            raise StructureError("perturb needs dense couplings")
        segments.append(
            ParamSegment(
                segment.duration,
                segment.weight + increment.weight,
                segment.bias + increment.bias,
                segment.alpha + increment.alpha,
            )
        )
    return ParamPath(p.structure, tuple(segments))


def param_distance(p1: ParamPath, p2: ParamPath) -> float:
    """
    ||theta1 - theta2||_{inf,inf} on the common refinement of both breakpoint sets.

    Raises:
        StructureError: If structures, D or total times differ.
    """
    if p1.structure is not p2.structure:
        raise StructureError("structures differ")
    if p1.dim != p2.dim:
        raise StructureError("D differs: %d vs %d" % (p1.dim, p2.dim))
    if not np.isclose(p1.total_time, p2.total_time, rtol=0.0, atol=_RATIO_TOL):
        raise StructureError(
            "total times differ: %r vs %r" % (p1.total_time, p2.total_time)
        )

    cuts = np.union1d(p1.breakpoints, p2.breakpoints)
    distance = 0.0
    for start, end in zip(cuts[:-1], cuts[1:]):
        if end - start <= _RATIO_TOL:
            continue
        mid = 0.5 * (start + end)
        s1 = p1.segments[p1.segment_index(mid)]
        s2 = p2.segments[p2.segment_index(mid)]
        if not (s1.is_dense and s2.is_dense):
            raise StructureError("param_distance needs dense couplings")
        difference = ParamSegment(
            1.0, s1.weight - s2.weight, s1.bias - s2.bias, s1.alpha - s2.alpha
        )
        distance = max(distance, difference.norm())
    return distance


def steps_per_segment(p: ParamPath, dt: float) -> List[Optional[int]]:
    """
    Number of dt steps in each segment, or None entries where not aligned.

    Raises:
        DomainError: If dt <= 0.
    """
    if not (np.isfinite(dt) and dt > 0):
        raise DomainError("dt must be > 0, got %r" % dt)
    counts = []
    for duration in p.durations:
        ratio = duration / dt
        steps = int(round(ratio))
        aligned = abs(ratio - steps) <= _RATIO_TOL * max(1.0, ratio)
        counts.append(steps if aligned else None)
    return counts


def time_correct(p: ParamPath, dt: float) -> Tuple[ParamPath, float]:
    """
    Snap every segment duration to the nearest multiple of dt (ties toward +inf);
    durations that would round to zero become exactly one step.

    Args:
        p (ParamPath): Path to correct.
        dt (float): Time step.

    Raises:
        DomainError: If dt <= 0.

    Returns:
        Tuple[ParamPath, float]: The corrected path and max_i |tau_i - tau'_i|.
    """
    if not (np.isfinite(dt) and dt > 0):
        raise DomainError("dt must be > 0, got %r" % dt)

    segments = []
    max_shift = 0.0
    for segment in p.segments:
        steps = max(1, int(np.floor(segment.duration / dt + 0.5 + _RATIO_TOL)))
        duration = steps * dt
        max_shift = max(max_shift, abs(segment.duration - duration))
        segments.append(replace(segment, duration=duration))

    logger.debug(
        "time correction with dt=%g shifted segments by up to %g", dt, max_shift
    )
    return ParamPath(p.structure, tuple(segments)), max_shift


def zeros_like(p: ParamPath) -> ParamPath:
    """A dense path of the same shape with all parameters zero."""
    return ParamPath(
        p.structure,
        tuple(
            ParamSegment(segment.duration, np.zeros((p.dim, p.dim)), np.zeros(p.dim))
            for segment in p.segments
        ),
    )


def random_path(
    rng: np.random.Generator,
    structure: Structure,
    dim: int,
    durations: Iterable[float],
    scale: float = 1.0,
    alpha_range: Tuple[float, float] = (0.0, 1.0),
) -> ParamPath:
    """Path with entries uniform in [-scale, scale], alphas uniform in `alpha_range`."""
    segments = []
    for duration in durations:
        segments.append(
            ParamSegment(
                duration,
                rng.uniform(-scale, scale, size=(dim, dim)),
                rng.uniform(-scale, scale, size=dim),
                rng.uniform(*alpha_range) if structure is Structure.SEPARATION else 0.0,
            )
        )
    return ParamPath(structure, tuple(segments))
