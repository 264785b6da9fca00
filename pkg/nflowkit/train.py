"""
Fitting parameter paths through their compiled networks
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .core import ActivationFamily, mix_channels
from .discretize import compile_path, layer_segment_indices
from .errors import DivergenceError, DomainError, StructureError
from .network import Layer, LayerKind, Network
from .operator import (
    BasisFrame,
    OperatorModel,
    coefficient_bound,
    decode,
    encode,
    grid_norm,
    operator_forward,
    project_output,
    relative_l2,
    truncation_error,
)
from .params import ParamPath, ParamSegment, Structure

logger = logging.getLogger(__name__)

Parameters = Dict[str, np.ndarray]

# Smallest admissible value of 1 - dt * alpha and 1 - a * dt * alpha
WINDOW_MARGIN = 0.05


@dataclass(frozen=True)
class Budget:
    """
    Optimizer settings.

    Args:
        iterations (int): Number of Adam steps.
        learning_rate (float): Initial step size.
        final_learning_rate (float): Step size reached by the cosine decay.
        log_every (int): Log progress every `log_every` iterations, 0 for never.
    """

    iterations: int = 2000
    learning_rate: float = 1e-2
    final_learning_rate: float = 1e-4
    log_every: int = 0

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0, got %d" % self.iterations)
        if not self.learning_rate > 0 or self.final_learning_rate < 0:
            raise ValueError("learning rates must be positive")

    def learning_rate_at(self, iteration: int) -> float:
        """Cosine decay from `learning_rate` to `final_learning_rate`."""
        if self.iterations <= 1:
            return self.learning_rate
        progress = iteration / (self.iterations - 1)
        return self.final_learning_rate + 0.5 * (
            self.learning_rate - self.final_learning_rate
        ) * (1.0 + math.cos(math.pi * progress))


@dataclass(frozen=True)
class FitTask:
    """
    A tabulated target: inputs (d_x, B) and targets (d_y, B), fitted in mean squared
    error.
    """

    inputs: np.ndarray
    targets: np.ndarray
    budget: Budget = field(default_factory=Budget)
    seed: int = 0

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=float)
        targets = np.array(self.targets, dtype=float)
        if inputs.ndim == 1:
            inputs = inputs[None]
        if targets.ndim == 1:
            targets = targets[None]
        if inputs.ndim != 2 or targets.ndim != 2:
            raise StructureError("inputs and targets must be (dim, B) arrays")
        if inputs.shape[1] == 0:
            raise ValueError("the probe set is empty")
        if inputs.shape[1] != targets.shape[1]:
            raise StructureError(
                "%d inputs but %d targets" % (inputs.shape[1], targets.shape[1])
            )
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)


@dataclass(frozen=True)
class OperatorTask:
    """Pairs of grid functions (B, *grid) with a held-out fraction for evaluation."""

    inputs: np.ndarray
    outputs: np.ndarray
    budget: Budget = field(default_factory=Budget)
    seed: int = 0
    holdout: float = 0.2

    def __post_init__(self):
        inputs = np.array(self.inputs, dtype=float)
        outputs = np.array(self.outputs, dtype=float)
        if inputs.shape[0] == 0:
            raise ValueError("the training set is empty")
        if inputs.shape[0] != outputs.shape[0]:
            raise StructureError(
                "%d inputs but %d outputs" % (inputs.shape[0], outputs.shape[0])
            )
        if not 0.0 <= self.holdout < 1.0:
            raise ValueError("holdout must be in [0, 1), got %r" % self.holdout)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)


@dataclass(frozen=True)
class Template:
    """
    Shape of the trainable path: structure, width D, segment durations, dt, slope a.

    Every duration must be a multiple of dt. With `train_alpha` False the alphas keep
    their initial value.
    """

    structure: Structure
    width: int
    durations: Tuple[float, ...]
    dt: float
    slope: float
    train_alpha: bool = True
    alpha_init: float = 0.0
    weight_scale: float = 0.5
    symmetric_lift: bool = True

    def __post_init__(self):
        object.__setattr__(self, "structure", Structure(self.structure))
        object.__setattr__(self, "durations", tuple(float(d) for d in self.durations))
        if self.width < 1:
            raise StructureError("width must be >= 1, got %d" % self.width)
        if not self.durations:
            raise StructureError("a template needs at least one segment")
        if not self.dt > 0:
            raise DomainError("dt must be > 0, got %r" % self.dt)

    @classmethod
    def uniform(
        cls,
        structure: Structure,
        width: int,
        depth: int,
        dt: float,
        slope: float,
        **kwargs,
    ) -> "Template":
        """`depth` segments of length dt, one layer each."""
        return cls(structure, width, (dt,) * depth, dt, slope, **kwargs)

    @property
    def activation(self) -> ActivationFamily:
        return ActivationFamily(self.slope)

    @property
    def trains_alpha(self) -> bool:
        return self.train_alpha and self.structure is Structure.SEPARATION


@dataclass(frozen=True)
class FitResult:
    """Best-loss artifacts and the loss curve."""

    path: ParamPath
    network: Network
    losses: np.ndarray
    best_loss: float
    best_iteration: int


def alpha_window(
    fam: ActivationFamily, dt: float, margin: float = WINDOW_MARGIN
) -> Tuple[float, float]:
    """
    Interval of alpha with 1 - dt * alpha >= margin and 1 - a * dt * alpha >= margin.
    """
    low, high = -math.inf, (1.0 - margin) / dt
    if fam.slope > 0:
        high = min(high, (1.0 - margin) / (fam.slope * dt))
    elif fam.slope < 0:
        low = (1.0 - margin) / (fam.slope * dt)
    return low, high


def init_parameters(
    template: Template, input_dim: int, output_dim: int, rng: np.random.Generator
) -> Parameters:
    """
    Random couplings and lift, zero biases, alphas at `alpha_init`.

    With a symmetric lift the second half of the channels starts as the negation of the
    first half, so z and -z are both available to the activation.
    """
    D = template.width
    S = len(template.durations)
    lift = rng.normal(size=(D, input_dim)) / math.sqrt(max(input_dim, 1))
    if template.symmetric_lift and D >= 2:
        half = D // 2
        lift[half : 2 * half] = -lift[:half]
    scale = template.weight_scale / math.sqrt(D)
    alpha = template.alpha_init if template.structure is Structure.SEPARATION else 0.0
    alphas = np.full(S, alpha)
    low, high = alpha_window(template.activation, template.dt)
    return {
        "lift": lift,
        "W": rng.uniform(-scale, scale, size=(S, D, D)),
        "b": np.zeros((S, D)),
        "alpha": np.clip(alphas, low, high),
        "readout": np.zeros((output_dim, D)),
    }


def parameters_to_path(template: Template, params: Parameters) -> ParamPath:
    return ParamPath(
        template.structure,
        tuple(
            ParamSegment(duration, params["W"][i], params["b"][i], params["alpha"][i])
            for i, duration in enumerate(template.durations)
        ),
    )


def build_network(template: Template, params: Parameters) -> Network:
    """Compile the path at dt and attach lift and readout."""
    net = compile_path(
        parameters_to_path(template, params), template.dt, template.activation
    )
    return net.with_maps(lift=params["lift"], readout=params["readout"])


def _layer_forward(layer: Layer, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    p = layer.linear(z)
    return layer(z), p


def _layer_backward(
    layer: Layer, z: np.ndarray, p: np.ndarray, g: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float, float]:
    """
    Gradients of one dense layer: (dz, dW, db, dgamma, dscale).

    The subgradient at the kink is the positive-branch slope. Affine layers are plain
    layers with gamma = scale = 1, so they still report d gamma and d scale.
    """
    dgamma = dscale = 0.0
    if layer.kind is LayerKind.RESIDUAL:
        gp = layer.step * g * np.where(p >= 0, 1.0, layer.slope)
        dz = g
    else:
        u = layer.scale * p
        negative = u < 0
        gu = g * np.where(negative, layer.gamma, 1.0)
        dgamma = float(np.sum(g * u * negative))
        dscale = float(np.sum(gu * p))
        gp = layer.scale * gu
        dz = 0.0
    dW = gp @ z.T
    db = np.sum(gp, axis=1)
    dz = dz + layer.weight.T @ gp
    return dz, dW, db, dgamma, dscale


def _tape(
    net: Network, v: np.ndarray
) -> Tuple[np.ndarray, List[Tuple[np.ndarray, np.ndarray]]]:
    z = mix_channels(net.lift, v)
    tape = []
    for index, layer in enumerate(net.layers):
        out, p = _layer_forward(layer, z)
        if not np.all(np.isfinite(out)):
            raise DivergenceError("layer", index)
        tape.append((z, p))
        z = out
    return z, tape


def kink_distance(
    template: Template, params: Parameters, inputs: np.ndarray
) -> np.ndarray:
    """Per probe, the smallest |pre-activation| over all activated layers."""
    net = build_network(template, params)
    _, tape = _tape(net, np.asarray(inputs, dtype=float))
    distance = np.full(inputs.shape[1], np.inf)
    for layer, (_, p) in zip(net.layers, tape):
        if layer.kind is not LayerKind.AFFINE:
            distance = np.minimum(distance, np.min(np.abs(p), axis=0))
    return distance


def loss_and_gradients(
    template: Template, params: Parameters, inputs: np.ndarray, targets: np.ndarray
) -> Tuple[float, Parameters]:
    """
    Mean squared error of the compiled network and its reverse-mode gradients.

    Layer gradients are mapped back to the path: split layers carry dt * W and dt * b,
    and alpha enters through gamma and scale, with
    d scale / d alpha = dt * scale^2 and
    d gamma / d alpha = dt * (a - 1) / (1 - a * dt * alpha)^2.

    Args:
        template (Template): Path shape.
        params (Parameters): Current parameters, including the readout.
        inputs (np.ndarray): Shape (d_x, B).
        targets (np.ndarray): Shape (d_y, B).

    Returns:
        Tuple[float, Parameters]: Loss and gradients with the keys of `params`.
    """
    net = build_network(template, params)
    inputs = np.asarray(inputs, dtype=float)
    latent, tape = _tape(net, inputs)
    outputs = mix_channels(net.readout, latent)
    residual = outputs - targets
    loss = float(np.mean(residual**2))

    grads = {key: np.zeros_like(value) for key, value in params.items()}
    gy = 2.0 * residual / residual.size
    grads["readout"] = gy @ latent.T
    g = net.readout.T @ gy

    dt = template.dt
    slope = template.slope
    segment_of = layer_segment_indices(parameters_to_path(template, params), dt)
    for layer, (z, p), index in reversed(list(zip(net.layers, tape, segment_of))):
        g, dW, db, dgamma, dscale = _layer_backward(layer, z, p, g)
        if template.structure is Structure.COMPOSITION:
            grads["W"][index] += dW
            grads["b"][index] += db
            continue
        grads["W"][index] += dt * dW
        grads["b"][index] += dt * db
        if template.trains_alpha:
            alpha = params["alpha"][index]
            scale = 1.0 / (1.0 - dt * alpha)
            dgamma_dalpha = dt * (slope - 1.0) / (1.0 - slope * dt * alpha) ** 2
            grads["alpha"][index] += dscale * dt * scale**2 + dgamma * dgamma_dalpha

    grads["lift"] = g @ inputs.T
    return loss, grads


def finite_difference_gradient(
    fn: Callable[[np.ndarray], float], x: np.ndarray, step: float = 1e-5
) -> np.ndarray:
    """Central differences (fn(x + h e_i) - fn(x - h e_i)) / 2h for every entry of x."""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    for index in np.ndindex(*x.shape):
        original = x[index]
        x[index] = original + step
        upper = fn(x)
        x[index] = original - step
        lower = fn(x)
        x[index] = original
        grad[index] = (upper - lower) / (2.0 * step)
    return grad


def gradient_check(
    template: Template,
    params: Parameters,
    inputs: np.ndarray,
    targets: np.ndarray,
    step: float = 1e-5,
    floor: float = 1e-5,
) -> Dict[str, float]:
    """
    Per parameter group, ||numeric - reverse|| / max(||numeric||, floor).

    Probes should keep a distance well above `step` from every activation kink, see
    `kink_distance`. Alpha is skipped unless the template trains it.
    """
    _, grads = loss_and_gradients(template, params, inputs, targets)
    errors: Dict[str, float] = {}
    for key in ("lift", "W", "b", "alpha", "readout"):
        if key == "alpha" and not template.trains_alpha:
            continue

        def loss_of(x: np.ndarray, key: str = key) -> float:
            trial = dict(params, **{key: x})
            return loss_and_gradients(template, trial, inputs, targets)[0]

        numeric = finite_difference_gradient(loss_of, params[key], step)
        scale = max(float(np.linalg.norm(numeric)), floor)
        errors[key] = float(np.linalg.norm(numeric - grads[key])) / scale
    return errors


class Adam:
    """Adam on a dictionary of arrays."""

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m: Parameters = {}
        self.v: Parameters = {}

    def step(
        self, params: Parameters, grads: Parameters, learning_rate: float
    ) -> Parameters:
        self.step_count += 1
        t = self.step_count
        updated = {}
        for key, value in params.items():
            g = grads.get(key)
            if g is None:
                updated[key] = value
                continue
            m = self.beta1 * self.m.get(key, 0.0) + (1.0 - self.beta1) * g
            v = self.beta2 * self.v.get(key, 0.0) + (1.0 - self.beta2) * g * g
            self.m[key], self.v[key] = m, v
            m_hat = m / (1.0 - self.beta1**t)
            v_hat = v / (1.0 - self.beta2**t)
            updated[key] = value - learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)
        return updated


def fit_readout(latent: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Least-squares readout R minimizing ||R z^L - y||."""
    solution, *_ = np.linalg.lstsq(latent.T, targets.T, rcond=None)
    return solution.T


def fit(
    task: FitTask, template: Template, params: Optional[Parameters] = None
) -> FitResult:
    """
    Fit a path through its compiled network by Adam.

    Every iteration refits the readout by least squares on the current latent states
    and then takes one Adam step on lift, couplings, biases and (when trained) alphas.
    Alphas are projected back into the invertibility window after each step.

    Args:
        task (FitTask): Probes, targets, budget and seed.
        template (Template): Path shape.
        params (Optional[Parameters], optional): Starting point. Defaults to None,
            meaning `init_parameters` with the task's seed.

    Raises:
        DivergenceError: If the loss becomes non-finite, naming the iteration.

    Returns:
        FitResult: The best-loss path, its network (with lift and readout) and the loss
            curve.
    """
    rng = np.random.default_rng(task.seed)
    if params is None:
        params = init_parameters(
            template, task.inputs.shape[0], task.targets.shape[0], rng
        )
    params = {key: np.array(value, dtype=float) for key, value in params.items()}
    low, high = alpha_window(template.activation, template.dt)
    frozen = () if template.trains_alpha else ("alpha",)

    optimizer = Adam()
    losses: List[float] = []
    best_loss, best_iteration, best_params = math.inf, 0, params
    budget = task.budget
    for iteration in range(budget.iterations + 1):
        try:
            latent = build_network(template, params).latent(task.inputs)
        except DivergenceError as error:
            raise DivergenceError("iteration", iteration) from error
        params["readout"] = fit_readout(latent, task.targets)
        loss, grads = loss_and_gradients(template, params, task.inputs, task.targets)
        if not math.isfinite(loss):
            raise DivergenceError("iteration", iteration)
        losses.append(loss)
        if loss < best_loss:
            best_loss, best_iteration = loss, iteration
            best_params = {key: value.copy() for key, value in params.items()}
        if budget.log_every and iteration % budget.log_every == 0:
            logger.info("iteration %d: loss %.3e", iteration, loss)
        if iteration == budget.iterations:
            break

        for key in frozen + ("readout",):
            grads.pop(key)
        params = optimizer.step(params, grads, budget.learning_rate_at(iteration))
        params["alpha"] = np.clip(params["alpha"], low, high)

    logger.info("best loss %.3e at iteration %d", best_loss, best_iteration)
    return FitResult(
        parameters_to_path(template, best_params),
        build_network(template, best_params),
        np.array(losses),
        best_loss,
        best_iteration,
    )


def sup_error(net: Network, inputs: np.ndarray, targets: np.ndarray) -> float:
    return float(np.max(np.abs(net(inputs) - targets)))


def _split(task: OperatorTask) -> Tuple[np.ndarray, np.ndarray]:
    count = task.inputs.shape[0]
    order = np.random.default_rng(task.seed).permutation(count)
    held = int(round(task.holdout * count))
    if count > 1:
        held = min(max(held, 1 if task.holdout > 0 else 0), count - 1)
    else:
        held = 0
    return order[held:], order[:held]


def fit_operator(
    task: OperatorTask, frame: BasisFrame, template: Template
) -> Tuple[OperatorModel, Dict[str, float]]:
    """
    Fit the coefficient-space network of decode o network o encode.

    Inputs are scaled into [-1, 1]^k by the coefficient bound M of the training set;
    the scaling is folded into the lift of the returned core.

    Returns:
        Tuple[OperatorModel, Dict[str, float]]: The model and held-out metrics:
            input_truncation (sup residual of the input projection), output_truncation
            (largest relative residual of the output projection), network_error (largest
            relative coefficient error) and relative_l2_mean / relative_l2_max of the
            full pipeline. Without held-out samples the training set is used.
    """
    train_index, test_index = _split(task)
    if len(test_index) == 0:
        test_index = train_index
    grid_dim = frame.grid.grid_dim

    train_inputs = task.inputs[train_index]
    bound = coefficient_bound(frame, train_inputs) or 1.0
    coefficients = encode(frame, train_inputs) / bound
    targets = project_output(frame, task.outputs[train_index])
    result = fit(FitTask(coefficients, targets, task.budget, task.seed), template)
    core = result.network.with_maps(lift=result.network.lift / bound)
    model = OperatorModel(
        frame,
        core,
        {
            "coefficient_bound": bound,
            "train_loss": result.best_loss,
            "best_iteration": result.best_iteration,
        },
    )

    test_inputs = task.inputs[test_index]
    test_outputs = task.outputs[test_index]
    projected = decode(frame, project_output(frame, test_outputs))
    network_part = decode(frame, core(encode(frame, test_inputs)))
    target_norm = grid_norm(test_outputs, grid_dim)
    errors = relative_l2(operator_forward(model, test_inputs), test_outputs, grid_dim)
    metrics = {
        "train_loss": result.best_loss,
        "input_truncation": truncation_error(frame, test_inputs),
        "output_truncation": float(
            np.max(grid_norm(test_outputs - projected, grid_dim) / target_norm)
        ),
        "network_error": float(
            np.max(grid_norm(network_part - projected, grid_dim) / target_norm)
        ),
        "relative_l2_mean": float(np.mean(errors)),
        "relative_l2_max": float(np.max(errors)),
    }
    logger.info("operator fit: held-out relative L2 %.3e", metrics["relative_l2_mean"])
    return model, metrics
