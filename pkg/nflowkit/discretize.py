"""
Compile parameter paths into finite-depth networks
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .core import ActivationFamily, ChannelKind, LatentState
from .errors import AlignmentError, DomainError, StructureError
from .flow import FlowProblem, integrate_reference
from .network import Layer, LayerKind, Network
from .params import ParamPath, Structure, steps_per_segment, time_correct

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolvedActivation:
    """
    Closed-form inverse of w = z - dt * alpha * sigma_a(z): z = sigma_gamma(scale * w).
    """

    gamma: float
    scale: float

    def __call__(self, w: np.ndarray) -> np.ndarray:
        u = self.scale * np.asarray(w, dtype=float)
        return np.where(u >= 0, u, self.gamma * u)


@dataclass(frozen=True)
class ErrorRow:
    """One line of a discretization error table."""

    dt: float
    layers: int
    max_shift: float
    sup_error: float
    ratio: Optional[float]


def solve_implicit_step(
    fam: ActivationFamily, dt: float, alpha: float
) -> SolvedActivation:
    """
    Solve the nonlinear substep z - dt * alpha * sigma_a(z) = w in closed form.

    On z >= 0 the relation reads (1 - dt * alpha) z = w, on z < 0 it reads
    (1 - a * dt * alpha) z = w, hence gamma = (1 - dt * alpha) / (1 - a * dt * alpha)
    and scale = 1 / (1 - dt * alpha).

    Args:
        fam (ActivationFamily): psi = sigma_a.
        dt (float): Time step.
        alpha (float): Weight of the nonlinear term.

    Raises:
        DomainError: If dt <= 0 or either invertibility inequality fails.

    Returns:
        SolvedActivation: gamma and scale.
    """
    if not (np.isfinite(dt) and dt > 0):
        raise DomainError("dt must be > 0, got %r" % dt)
    positive = 1.0 - dt * alpha
    negative = 1.0 - fam.slope * dt * alpha
    if not positive > 0:
        raise DomainError(
            "invertibility window violated: 1 - dt*alpha = %r is not > 0" % positive
        )
    if not negative > 0:
        raise DomainError(
            "invertibility window violated: 1 - a*dt*alpha = %r is not > 0" % negative
        )
    return SolvedActivation(gamma=positive / negative, scale=1.0 / positive)


def layer_segment_indices(p: ParamPath, dt: float) -> List[int]:
    """Segment index for every layer, one layer per dt step."""
    counts = steps_per_segment(p, dt)
    unaligned = [index for index, count in enumerate(counts) if count is None]
    if unaligned:
        raise AlignmentError(
            "segment(s) %s are not integer multiples of dt=%r; run time_correct first"
            % (unaligned, dt)
        )
    indices: List[int] = []
    for index, count in enumerate(counts):
        indices.extend([index] * count)
    return indices


def euler_resnet(
    p: ParamPath,
    dt: float,
    fam: ActivationFamily,
    channel_kind: Optional[ChannelKind] = None,
) -> Network:
    """
    Explicit Euler on the composition flow:
    z^l = z^{l-1} + dt * sigma(W^l z^{l-1} + b^l).

    Layer l holds the segment active on (t_{l-1}, t_l]. Lift and readout are the
    identity.

    Raises:
        StructureError: If `p` is not a composition path.
        AlignmentError: If a segment duration is not a multiple of dt.
    """
    if p.structure is not Structure.COMPOSITION:
        raise StructureError("euler_resnet needs a composition path")
    layers = tuple(
        Layer(
            p.segments[index].weight,
            p.segments[index].bias,
            LayerKind.RESIDUAL,
            step=dt,
            slope=fam.slope,
        )
        for index in layer_segment_indices(p, dt)
    )
    logger.info("compiled ResNet with %d layers (dt=%g)", len(layers), dt)
    return Network(
        np.eye(p.dim),
        layers,
        np.eye(p.dim),
        channel_kind or ChannelKind.scalar(),
        "resnet",
        fam.slope,
    )


def split_plain(
    p: ParamPath,
    dt: float,
    fam: ActivationFamily,
    channel_kind: Optional[ChannelKind] = None,
) -> Network:
    """
    Semi-implicit splitting of the separation flow into a plain network.

    Z_{k+1/2} = Z_k + dt W Z_k + dt b, then Z_{k+1} solves
    Z_{k+1} - dt * alpha * sigma_a(Z_{k+1}) = Z_{k+1/2}. W, b and alpha come from the
    segment active on (t_k, t_{k+1}]. Layers with alpha = 0 are affine.

    Raises:
        StructureError: If `p` is not a separation path.
        AlignmentError: If a segment duration is not a multiple of dt.
        DomainError: If the invertibility window fails, naming the segment.
    """
    if p.structure is not Structure.SEPARATION:
        raise StructureError("split_plain needs a separation path")

    compiled = []
    for index, segment in enumerate(p.segments):
        if segment.is_dense:
            weight, skip = np.eye(p.dim) + dt * segment.weight, 0.0
        else:
            weight, skip = segment.weight.scaled(dt), 1.0
        bias = dt * segment.bias

        if segment.alpha == 0.0:
            compiled.append(Layer(weight, bias, LayerKind.AFFINE, skip=skip))
            continue
        try:
            solved = solve_implicit_step(fam, dt, segment.alpha)
        except DomainError as error:
            raise DomainError("segment %d: %s" % (index, error)) from error
        compiled.append(
            Layer(
                weight,
                bias,
                LayerKind.PLAIN,
                gamma=solved.gamma,
                scale=solved.scale,
                skip=skip,
            )
        )

    layers = tuple(compiled[index] for index in layer_segment_indices(p, dt))
    logger.info("compiled plain network with %d layers (dt=%g)", len(layers), dt)
    return Network(
        np.eye(p.dim),
        layers,
        np.eye(p.dim),
        channel_kind or ChannelKind.scalar(),
        "plain",
        fam.slope,
    )


def compile_path(
    p: ParamPath,
    dt: float,
    fam: ActivationFamily,
    channel_kind: Optional[ChannelKind] = None,
) -> Network:
    """euler_resnet for composition paths, split_plain for separation paths."""
    if p.structure is Structure.COMPOSITION:
        return euler_resnet(p, dt, fam, channel_kind)
    return split_plain(p, dt, fam, channel_kind)


def _is_mergeable(layer: Layer) -> bool:
    return layer.is_dense and (
        layer.kind is LayerKind.AFFINE
        or (layer.kind is LayerKind.PLAIN and layer.gamma == 1.0 and layer.scale == 1.0)
    )


def merge_affine(net: Network) -> Network:
    """
    Compose maximal runs of purely affine dense layers into single affine layers.

    (W1, b1) followed by (W2, b2) becomes (W2 W1, W2 b1 + b2).

    Raises:
        StructureError: If `net` is not plain.
    """
    if net.structure_kind != "plain":
        raise StructureError("merge_affine needs a plain network")

    merged: List[Layer] = []
    run: List[Layer] = []

    def flush():
        if not run:
            return
        if len(run) == 1:
            merged.append(run[0])
        else:
            weight = np.eye(net.width)
            bias = np.zeros(net.width)
            for layer in run:
                layer_weight = layer.weight + layer.skip * np.eye(net.width)
                weight = layer_weight @ weight
                bias = layer_weight @ bias + layer.bias
            merged.append(Layer(weight, bias, LayerKind.AFFINE))
        run.clear()

    for layer in net.layers:
        if _is_mergeable(layer):
            run.append(layer)
        else:
            flush()
            merged.append(layer)
    flush()

    logger.debug("merge_affine: %d -> %d layers", net.depth, len(merged))
    return Network(
        net.lift,
        tuple(merged),
        net.readout,
        net.channel_kind,
        net.structure_kind,
        net.slope,
    )


def measure_discretization_error(
    p: ParamPath,
    dt_list: Sequence[float],
    fam: ActivationFamily,
    probes: np.ndarray,
    substeps_per_segment: int = 256,
    channel_kind: Optional[ChannelKind] = None,
) -> List[ErrorRow]:
    """
    Sup discrepancy between compiled networks and the reference flow.

    For each dt the path is time-corrected and compiled with the scheme matching its
    structure. The reference is the RK4 flow of the uncorrected path, so the reported
    error includes the time-correction perturbation (`max_shift`).

    Args:
        p (ParamPath): The path.
        dt_list (Sequence[float]): Positive, descending steps.
        fam (ActivationFamily): Activation.
        probes (np.ndarray): Initial states, shape (D, ...), trailing axes as batch.
        substeps_per_segment (int, optional): RK4 substeps of the oracle. Defaults to
            256.
        channel_kind (Optional[ChannelKind], optional): Kind of the latent channels.
            Defaults to scalar channels.

    Raises:
        DomainError: If a dt is not positive or the list is not descending.

    Returns:
        List[ErrorRow]: One row per dt; `ratio` is error(previous dt) / error(dt).
    """
    dts = [float(dt) for dt in dt_list]
    if any(not dt > 0 for dt in dts):
        raise DomainError("every dt must be > 0, got %s" % dts)
    if any(later >= earlier for earlier, later in zip(dts, dts[1:])):
        raise DomainError("dt_list must be strictly descending, got %s" % dts)

    kind = channel_kind or ChannelKind.scalar()
    initial = LatentState(probes, kind)
    fp = FlowProblem(p, initial, fam)
    reference = integrate_reference(fp, substeps_per_segment).data

    rows: List[ErrorRow] = []
    for dt in dts:
        corrected, max_shift = time_correct(p, dt)
        net = compile_path(corrected, dt, fam, kind)
        error = float(np.max(np.abs(net.latent(initial.data) - reference)))
        ratio = rows[-1].sup_error / error if rows and error > 0 else None
        if ratio is not None and ratio < 1.0:
            logger.warning("error grew from dt=%g to dt=%g", rows[-1].dt, dt)
        rows.append(ErrorRow(dt, net.depth, max_shift, error, ratio))
        logger.debug("dt=%g: L=%d, sup error %.3e", dt, net.depth, error)
    return rows


def first_order_constant(rows: Iterable[ErrorRow]) -> float:
    """Empirical C_1 = max over rows of sup_error / dt."""
    return max((row.sup_error / row.dt for row in rows), default=0.0)
