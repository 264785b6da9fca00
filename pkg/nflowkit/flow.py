"""
Neural flow vector fields, reference integration and stability estimates
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .core import (
    ActivationFamily,
    LatentState,
    coupling_norm,
    couple,
    expand_bias,
    trajectory_sup_norm,
)
from .errors import DivergenceError, DomainError, StructureError
from .params import ParamPath, ParamSegment, Structure, param_distance

logger = logging.getLogger(__name__)

VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FlowProblem:
    """
    Initial value problem dz/dt = Phi_theta(z), z(0) = initial, on (0, T].

    `initial` may carry extra trailing axes in its data (a batch of probes) as long as
    the leading axis holds the D channels.
    """

    path: ParamPath
    initial: LatentState
    activation: ActivationFamily

    def __post_init__(self):
        if self.initial.channels != self.path.dim:
            raise StructureError(
                "initial state has %d channels, path has D=%d"
                % (self.initial.channels, self.path.dim)
            )


@dataclass(frozen=True)
class StabilityBound:
    """||z1 - z2||_{inf,inf} <= M * T * exp(L * T) * ||theta1 - theta2||_{inf,inf}."""

    lipschitz_L: float
    param_M: float
    bound: float

    def __post_init__(self):
        for name in ("lipschitz_L", "param_M", "bound"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be nonnegative" % name)


def field_rhs(
    z: np.ndarray,
    segment: ParamSegment,
    structure: Structure,
    activation: ActivationFamily,
) -> np.ndarray:
    """
    Phi_theta on raw channel arrays of shape (D, ...).

    Composition: sigma(W z + b). Separation: W z + b + alpha * sigma(z).
    """
    linear = couple(segment.weight, z) + expand_bias(segment.bias, z)
    if structure is Structure.COMPOSITION:
        return activation(linear)
    if segment.alpha == 0.0:
        return linear
    return linear + segment.alpha * activation(z)


def rhs(
    s: LatentState,
    segment: ParamSegment,
    structure: Structure,
    activation: ActivationFamily,
) -> LatentState:
    """Evaluate the flow's right-hand side at state `s`."""
    if s.channels != segment.dim:
        raise StructureError(
            "state has %d channels, segment has D=%d" % (s.channels, segment.dim)
        )
    return s.with_data(field_rhs(s.data, segment, Structure(structure), activation))


def rk4_segment(
    field: VectorField,
    z: np.ndarray,
    duration: float,
    substeps: int,
    index: int = 0,
) -> Iterator[np.ndarray]:
    """
    Classical 4th order Runge-Kutta on one constant segment, yielding the state after
    every substep.

    Raises:
        DivergenceError: If a state becomes non-finite, naming segment `index`.
    """
    h = duration / substeps
    for _ in range(substeps):
        k1 = field(z)
        k2 = field(z + 0.5 * h * k1)
        k3 = field(z + 0.5 * h * k2)
        k4 = field(z + h * k3)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise DivergenceError("segment", index)
        yield z


def _steps(
    fp: FlowProblem, substeps_per_segment: int
) -> Iterator[Tuple[float, np.ndarray]]:
    if substeps_per_segment < 1:
        raise DomainError(
            "substeps_per_segment must be >= 1, got %d" % substeps_per_segment
        )

    z = fp.initial.data
    start = 0.0
    for index, segment in enumerate(fp.path.segments):
        field = lambda y, segment=segment: field_rhs(  # noqa: E731
            y, segment, fp.path.structure, fp.activation
        )
        h = segment.duration / substeps_per_segment
        steps = rk4_segment(field, z, segment.duration, substeps_per_segment, index)
        for k, z in enumerate(steps):
            yield start + (k + 1) * h, z
        logger.debug(
            "segment %d integrated up to t=%g", index, start + segment.duration
        )
        start += segment.duration


def integrate_reference(fp: FlowProblem, substeps_per_segment: int = 64) -> LatentState:
    """
    z(T) by fixed-step RK4 inside every constant segment.

    Segment boundaries, where theta_t jumps, are always step boundaries.

    Args:
        fp (FlowProblem): The problem.
        substeps_per_segment (int, optional): RK4 steps per segment. Defaults to 64.

    Raises:
        DomainError: If `substeps_per_segment` < 1.
        DivergenceError: If non-finite values appear, naming the segment.

    Returns:
        LatentState: The state at time T.
    """
    z = fp.initial.data
    for _, z in _steps(fp, substeps_per_segment):
        pass
    return fp.initial.with_data(z)


def trajectory(
    fp: FlowProblem, substeps_per_segment: int = 64
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """Times and states at t = 0 and after every RK4 substep."""
    times = [0.0]
    states = [fp.initial.data]
    for t, z in _steps(fp, substeps_per_segment):
        times.append(t)
        states.append(z)
    return np.array(times), states


def refinement_errors(
    fp: FlowProblem, substeps: Sequence[int], reference_substeps: int = 1024
) -> List[float]:
    """
    Sup distance of z(T) at each substep count to a run with `reference_substeps`.

    On smooth problems consecutive doublings shrink the error by about 16.
    """
    reference = integrate_reference(fp, reference_substeps).data
    return [
        float(np.max(np.abs(integrate_reference(fp, n).data - reference)))
        for n in substeps
    ]


def split_discrepancy(
    p: ParamPath,
    initial: LatentState,
    fam: ActivationFamily,
    substeps_per_segment: int = 256,
) -> float:
    """
    Sup distance between z(T) of the whole path and of [0, T/2] followed by [T/2, T].

    The split point usually falls inside a segment, so the two runs step on
    different grids.
    """
    head, tail = p.split_at(0.5 * p.total_time)
    whole = integrate_reference(FlowProblem(p, initial, fam), substeps_per_segment)
    middle = integrate_reference(FlowProblem(head, initial, fam), substeps_per_segment)
    end = integrate_reference(FlowProblem(tail, middle, fam), substeps_per_segment)
    return float(np.max(np.abs(end.data - whole.data)))


def lipschitz_state(
    seg: ParamSegment, structure: Structure, fam: ActivationFamily
) -> float:
    """
    Lipschitz constant of Phi_theta in z on one segment.

    Composition: max(1, |a|) * ||W||_inf. Separation: ||W||_inf + |alpha| * max(1, |a|).
    """
    weight_norm = coupling_norm(seg.weight)
    if Structure(structure) is Structure.COMPOSITION:
        return fam.lipschitz * weight_norm
    return weight_norm + abs(seg.alpha) * fam.lipschitz


def path_lipschitz(p: ParamPath, fam: ActivationFamily) -> float:
    """Maximum of `lipschitz_state` over the segments of `p`."""
    return max(lipschitz_state(segment, p.structure, fam) for segment in p.segments)


def gronwall_bound(
    p1: ParamPath,
    p2: ParamPath,
    state_sup: float,
    fam: ActivationFamily,
    distance: Optional[float] = None,
) -> StabilityBound:
    """
    Parameter-stability bound M * T * exp(L * T) * ||theta1 - theta2||_{inf,inf}.

    Args:
        p1 (ParamPath): Reference path, supplies L.
        p2 (ParamPath): Perturbed path.
        state_sup (float): Sup norm of the solutions, measured by the caller.
        fam (ActivationFamily): Activation.
        distance (Optional[float], optional): Precomputed parameter distance.
            Defaults to None, in which case it is computed from the paths.

    Raises:
        StructureError: If structures or total times differ.
        DomainError: If `state_sup` is negative.

    Returns:
        StabilityBound: L, M and the bound.
    """
    if p1.structure is not p2.structure:
        raise StructureError(
            "structures differ: %s vs %s" % (p1.structure.value, p2.structure.value)
        )
    if state_sup < 0:
        raise DomainError("state_sup must be >= 0, got %r" % state_sup)
    if distance is None:
        distance = param_distance(p1, p2)
    elif not math.isclose(p1.total_time, p2.total_time, rel_tol=0.0, abs_tol=1e-9):
        raise StructureError(
            "total times differ: %r vs %r" % (p1.total_time, p2.total_time)
        )

    total_time = p1.total_time
    lipschitz_L = path_lipschitz(p1, fam)
    if p1.structure is Structure.COMPOSITION:
        param_M = fam.lipschitz * (state_sup + 1.0)
    else:
        param_M = state_sup + 1.0 + fam.lipschitz * state_sup

    bound = param_M * total_time * math.exp(lipschitz_L * total_time) * distance
    return StabilityBound(lipschitz_L=lipschitz_L, param_M=param_M, bound=bound)


def measured_deviation(
    p1: ParamPath,
    p2: ParamPath,
    initial: LatentState,
    fam: ActivationFamily,
    substeps_per_segment: int = 64,
) -> Tuple[float, float]:
    """
    Integrate both paths from `initial` and return (||z1 - z2||_{inf,inf}, state_sup),
    where state_sup is the larger trajectory sup norm.

    Both paths are integrated on the common refinement of their breakpoints so the
    two trajectories are sampled at the same times.
    """
    cuts = np.union1d(p1.breakpoints, p2.breakpoints)
    z1 = z2 = initial.data
    deviation = 0.0
    sup1 = sup2 = trajectory_sup_norm([initial.data])
    for start, end in zip(cuts[:-1], cuts[1:]):
        if end - start <= 1e-12:
            continue
        mid = 0.5 * (start + end)
        s1 = p1.segments[p1.segment_index(mid)]
        s2 = p2.segments[p2.segment_index(mid)]
        f1 = lambda y, s=s1: field_rhs(y, s, p1.structure, fam)  # noqa: E731
        f2 = lambda y, s=s2: field_rhs(y, s, p2.structure, fam)  # noqa: E731
        for y1, y2 in zip(
            rk4_segment(f1, z1, end - start, substeps_per_segment),
            rk4_segment(f2, z2, end - start, substeps_per_segment),
        ):
            deviation = max(deviation, float(np.max(np.abs(y1 - y2))))
            sup1 = max(sup1, float(np.max(np.abs(y1))))
            sup2 = max(sup2, float(np.max(np.abs(y2))))
            z1, z2 = y1, y2
    return deviation, max(sup1, sup2)
