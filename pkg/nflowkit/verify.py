"""
Property suites with measured values
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import discretize, io_model
from .construct import (
    DoubleWidthSegment,
    DoubleWidthSpec,
    activation_as_flow,
    assemble_uap_skeleton,
    build_double_width,
    signed_flow_trajectory,
)
from .convops import (
    ConvKernel,
    conv_apply,
    conv_path_from_dense,
    cyclic_shift,
    integrate_conv_flow,
)
from .core import ActivationFamily, ChannelKind, LatentState, constant_field
from .flow import (
    FlowProblem,
    gronwall_bound,
    integrate_reference,
    measured_deviation,
    refinement_errors,
    split_discrepancy,
    trajectory,
)
from .params import (
    ParamPath,
    ParamSegment,
    Structure,
    param_distance,
    perturb,
    random_path,
)
from .train import (
    Parameters,
    Template,
    alpha_window,
    gradient_check,
    init_parameters,
    kink_distance,
)

logger = logging.getLogger(__name__)

SUITES = ("core", "flow", "discretize", "conv", "construct", "gradient")

CONVERGENCE_DTS = (1 / 8, 1 / 16, 1 / 32, 1 / 64)
CONVERGENCE_COLUMNS = (
    "problem",
    "structure",
    "dt",
    "layers",
    "max_shift",
    "sup_error",
    "ratio",
    "c1",
)


@dataclass(frozen=True)
class CheckResult:
    """One measured property: passed when `measured relation threshold` holds."""

    suite: str
    name: str
    measured: float
    threshold: float
    passed: bool
    relation: str = "<="

    def line(self) -> str:
        return "%-10s %-32s %-5s measured=%.3e %s %.3e" % (
            self.suite,
            self.name,
            "PASS" if self.passed else "FAIL",
            self.measured,
            self.relation,
            self.threshold,
        )


@dataclass(frozen=True)
class VerifySizes:
    """Sample counts; the defaults are the acceptance sizes."""

    identity_samples: int = 10_000
    lipschitz_samples: int = 1_000
    semigroup_cases: int = 20
    order_problems: int = 20
    crossing_problems: int = 20
    gronwall_pairs: int = 200
    convergence_problems: int = 20
    serialization_networks: int = 100
    conv_cases: int = 50
    double_width_schedules: int = 50
    activation_flow_samples: int = 10_000
    skeleton_cases: int = 20
    gradient_networks: int = 100


def _check(
    suite: str, name: str, measured: float, threshold: float, relation: str = "<="
) -> CheckResult:
    passed = measured <= threshold if relation == "<=" else measured >= threshold
    passed = passed and math.isfinite(measured)
    return CheckResult(
        suite, name, float(measured), float(threshold), bool(passed), relation
    )


def _random_durations(
    rng: np.random.Generator, max_segments: int, total: float = 1.0
) -> List[float]:
    count = int(rng.integers(1, max_segments + 1))
    return list(rng.uniform(0.2, 1.0, size=count) * total / count)


def _random_structure(rng: np.random.Generator) -> Structure:
    return Structure.COMPOSITION if rng.random() < 0.5 else Structure.SEPARATION


def suite_core(rng: np.random.Generator, sizes: VerifySizes) -> List[CheckResult]:
    slopes = rng.uniform(-0.5, 2.0, size=sizes.identity_samples)
    ts = rng.uniform(-10.0, 10.0, size=sizes.identity_samples)
    worst = 0.0
    for a, t in zip(slopes, ts):
        fam = ActivationFamily(a)
        lhs = fam(t) - fam(-t)
        worst = max(worst, abs(lhs - (1.0 + a) * t) / max(1.0, abs(t)))

    lipschitz = 0.0
    for _ in range(sizes.lipschitz_samples):
        fam = ActivationFamily(rng.uniform(-2.0, 2.0))
        x, y = rng.uniform(-5.0, 5.0, size=2)
        if x != y:
            lipschitz = max(
                lipschitz, abs(fam(x) - fam(y)) / (fam.lipschitz * abs(x - y))
            )

    return [
        _check("core", "leaky_relu_identity", worst, 1e-12),
        _check("core", "activation_lipschitz", lipschitz, 1.0 + 1e-12),
    ]


def suite_flow(rng: np.random.Generator, sizes: VerifySizes) -> List[CheckResult]:
    semigroup = 0.0
    for index in range(sizes.semigroup_cases):
        structure = Structure.COMPOSITION if index % 2 == 0 else Structure.SEPARATION
        path = sign_stable_problem(rng, structure, _random_durations(rng, 3))
        fam = ActivationFamily(rng.uniform(-0.5, 0.9))
        z0 = LatentState(rng.uniform(0.5, 1.0, size=path.dim))
        semigroup = max(semigroup, split_discrepancy(path, z0, fam))

    order = math.inf
    for _ in range(sizes.order_problems):
        path, z0 = smooth_problem(rng)
        fp = FlowProblem(path, LatentState(z0), ActivationFamily(0.0))
        coarse, fine = refinement_errors(fp, (4, 8), 512)
        if coarse > 0 and fine > 0:
            order = min(order, math.log2(coarse / fine))

    not_decreasing = 0
    for _ in range(sizes.crossing_problems):
        dim = int(rng.integers(1, 4))
        path = random_path(rng, _random_structure(rng), dim, _random_durations(rng, 3))
        fam = ActivationFamily(rng.uniform(-0.5, 0.9))
        z0 = LatentState(rng.uniform(-1.0, 1.0, size=dim))
        coarse, fine = refinement_errors(FlowProblem(path, z0, fam), (16, 128))
        if coarse > 1e-13 and not fine < coarse:
            not_decreasing += 1

    # dz/dt = -z + 1, z(1) = 1 + (z0 - 1) / e
    linear = ParamPath(Structure.SEPARATION, (ParamSegment(1.0, [[-1.0]], [1.0]),))
    z_end = integrate_reference(
        FlowProblem(linear, LatentState([2.0]), ActivationFamily(0.0))
    )
    linear_error = abs(float(z_end.data[0]) - (1.0 + math.exp(-1.0)))

    violations = 0
    worst_ratio = 0.0
    for _ in range(sizes.gronwall_pairs):
        dim = int(rng.integers(1, 4))
        structure = _random_structure(rng)
        fam = ActivationFamily(rng.uniform(-0.5, 0.9))
        durations = _random_durations(rng, 3)
        p1 = random_path(rng, structure, dim, durations)
        delta = random_path(
            rng, structure, dim, durations, scale=0.05, alpha_range=(-0.05, 0.05)
        )
        p2 = perturb(p1, delta)
        z0 = LatentState(rng.uniform(-1.0, 1.0, size=dim))
        deviation, state_sup = measured_deviation(p1, p2, z0, fam)
        bound = gronwall_bound(p1, p2, state_sup, fam, param_distance(p1, p2)).bound
        if deviation > bound:
            violations += 1
        if bound > 0:
            worst_ratio = max(worst_ratio, deviation / bound)

    return [
        _check("flow", "semigroup_split", semigroup, 1e-9),
        _check("flow", "rk4_order_min", order, 3.5, ">="),
        _check("flow", "crossing_error_not_decreasing", not_decreasing, 0),
        _check("flow", "linear_reference", linear_error, 1e-8),
        _check("flow", "gronwall_violations", violations, 0),
        _check("flow", "gronwall_worst_ratio", worst_ratio, 1.0),
    ]


def smooth_problem(rng: np.random.Generator) -> Tuple[ParamPath, np.ndarray]:
    """
    Linear separation path (alpha = 0) and an initial state in [-1, 1]^D.

    Every W is s I with |s| in [1, 2] plus an off-diagonal part of row sum below 1/4,
    so dz/dt = W z + b is smooth and every eigenvalue has modulus in [0.75, 2.25].
    """
    dim = int(rng.integers(1, 4))
    segments = []
    for _ in range(int(rng.integers(1, 4))):
        coupling = rng.uniform(-0.25, 0.25, size=(dim, dim)) / dim
        np.fill_diagonal(coupling, 0.0)
        s = rng.choice([-1.0, 1.0]) * rng.uniform(1.0, 2.0)
        segments.append(
            ParamSegment(
                rng.uniform(0.5, 1.0),
                s * np.eye(dim) + coupling,
                rng.uniform(-1.0, 1.0, size=dim),
            )
        )
    z0 = rng.uniform(-1.0, 1.0, size=dim)
    return ParamPath(Structure.SEPARATION, tuple(segments)), z0


def sign_stable_problem(
    rng: np.random.Generator,
    structure: Structure,
    durations: Optional[Sequence[float]] = None,
) -> ParamPath:
    """
    Path whose activation arguments stay positive from initial states in [0.5, 1]^D:
    biases in [2, 3], small couplings and T <= 1.

    Without `durations` the segments last multiples of 1/8.
    """
    dim = int(rng.integers(1, 5))
    if durations is None:
        count = int(rng.integers(1, 4))
        durations = [int(rng.integers(1, 8 // count + 1)) / 8.0 for _ in range(count)]
    segments = []
    for duration in durations:
        segments.append(
            ParamSegment(
                duration,
                rng.uniform(-0.25, 0.25, size=(dim, dim)) / dim,
                rng.uniform(2.0, 3.0, size=dim),
                rng.uniform(0.0, 0.5) if structure is Structure.SEPARATION else 0.0,
            )
        )
    return ParamPath(structure, tuple(segments))


def _inverse_step_residual(rng: np.random.Generator, count: int) -> float:
    worst = 0.0
    for _ in range(count):
        fam = ActivationFamily(rng.uniform(-0.5, 0.9))
        dt = rng.uniform(1e-6, 0.9)
        alpha = rng.uniform(0.0, 1.0)
        w = rng.uniform(-10.0, 10.0)
        z = float(discretize.solve_implicit_step(fam, dt, alpha)(w))
        residual = z - dt * alpha * float(fam(z)) - w
        worst = max(worst, abs(residual) / max(1.0, abs(w)))
    return worst


def convergence_study(
    rng: np.random.Generator, count: int
) -> List[Tuple[Structure, List[discretize.ErrorRow]]]:
    """Error tables over CONVERGENCE_DTS for `count` sign-stable problems."""
    tables = []
    for index in range(count):
        structure = Structure.COMPOSITION if index % 2 == 0 else Structure.SEPARATION
        path = sign_stable_problem(rng, structure)
        fam = ActivationFamily(rng.uniform(-0.5, 0.9))
        probes = rng.uniform(0.5, 1.0, size=(path.dim, 3))
        rows = discretize.measure_discretization_error(
            path, CONVERGENCE_DTS, fam, probes
        )
        tables.append((structure, rows))
    return tables


def convergence_table(
    seed: int = 0, sizes: Optional[VerifySizes] = None
) -> Tuple[List[str], List[List[Any]]]:
    """
    The error tables behind the discretize suite's ratio checks, one row per problem
    and dt, with the problem's empirical C_1 on every row.
    """
    sizes = sizes or VerifySizes()
    rng = _suite_rng(seed, "discretize")
    rows: List[List[Any]] = []
    for problem, (structure, table) in enumerate(
        convergence_study(rng, sizes.convergence_problems)
    ):
        c1 = discretize.first_order_constant(table)
        for row in table:
            rows.append(
                [
                    problem,
                    structure.value,
                    row.dt,
                    row.layers,
                    row.max_shift,
                    row.sup_error,
                    row.ratio,
                    c1,
                ]
            )
    return list(CONVERGENCE_COLUMNS), rows


def suite_discretize(rng: np.random.Generator, sizes: VerifySizes) -> List[CheckResult]:
    ratios: List[float] = []
    for _, rows in convergence_study(rng, sizes.convergence_problems):
        ratios.extend(row.ratio for row in rows[1:] if row.ratio is not None)
    if not ratios:
        ratios = [math.nan]

    inverse = _inverse_step_residual(rng, sizes.identity_samples)

    merge = 0.0
    roundtrip = 0.0
    for _ in range(sizes.serialization_networks):
        dim = int(rng.integers(1, 4))
        fam = ActivationFamily(rng.uniform(-0.5, 0.9))
        structure = _random_structure(rng)
        path = random_path(rng, structure, dim, [0.25] * int(rng.integers(1, 4)))
        if structure is Structure.SEPARATION:
            path = ParamPath(
                structure,
                tuple(
                    replace(s, alpha=s.alpha if rng.random() < 0.5 else 0.0)
                    for s in path.segments
                ),
            )
        net = discretize.compile_path(path, 0.125, fam)
        probes = rng.uniform(-1.0, 1.0, size=(dim, 8))
        outputs = net(probes)
        if structure is Structure.SEPARATION:
            merged = discretize.merge_affine(net)
            scale = max(1.0, float(np.max(np.abs(outputs))))
            merge = max(merge, float(np.max(np.abs(merged(probes) - outputs))) / scale)
        loaded = io_model.load(io_model.save(net))
        roundtrip = max(roundtrip, float(np.max(np.abs(loaded(probes) - outputs))))

    return [
        _check("discretize", "inverse_step_identity", inverse, 1e-12),
        _check("discretize", "convergence_ratio_min", min(ratios), 1.6, ">="),
        _check("discretize", "convergence_ratio_max", max(ratios), 2.4),
        _check("discretize", "merge_affine", merge, 1e-12),
        _check("discretize", "save_load_roundtrip", roundtrip, 0.0),
    ]


def suite_conv(rng: np.random.Generator, sizes: VerifySizes) -> List[CheckResult]:
    emulation = 0.0
    equivariance = 0.0
    invariance = 0.0
    for _ in range(sizes.conv_cases):
        dim = int(rng.integers(1, 4))
        grid = ChannelKind.grid(int(rng.integers(4, 17)))
        structure = _random_structure(rng)
        fam = ActivationFamily(rng.uniform(-0.5, 0.9))
        path = random_path(rng, structure, dim, _random_durations(rng, 3))
        values = rng.uniform(-1.0, 1.0, size=dim)

        dense = integrate_reference(FlowProblem(path, LatentState(values), fam)).data
        conv = integrate_conv_flow(
            conv_path_from_dense(path, grid), constant_field(values, grid), fam
        )
        emulation = max(emulation, float(np.max(np.abs(conv.data - dense[:, None]))))
        invariance = max(invariance, float(np.max(np.ptp(conv.data, axis=1))))

        kernel = ConvKernel("full_grid", rng.normal(size=(dim, dim) + grid.shape), grid)
        state = LatentState(rng.normal(size=(dim,) + grid.shape), grid)
        shift = (int(rng.integers(0, grid.grid_size)),)
        lhs = conv_apply(kernel, cyclic_shift(state, shift)).data
        rhs = cyclic_shift(conv_apply(kernel, state), shift).data
        equivariance = max(equivariance, float(np.max(np.abs(lhs - rhs))))

    return [
        _check("conv", "dense_emulation", emulation, 1e-12),
        _check("conv", "constant_field_invariance", invariance, 1e-12),
        _check("conv", "translation_equivariance", equivariance, 0.0),
    ]


def random_schedule(
    rng: np.random.Generator, slope: float, max_dim: int = 3
) -> DoubleWidthSpec:
    dim = int(rng.integers(1, max_dim + 1))
    count = int(rng.integers(1, 5))
    return DoubleWidthSpec(
        slope,
        tuple(
            DoubleWidthSegment(
                rng.uniform(0.1, 0.4),
                rng.choice([-1.0, 1.0], size=dim),
                rng.uniform(-1.0, 1.0, size=(dim, dim)),
                rng.uniform(-1.0, 1.0, size=dim),
            )
            for _ in range(count)
        ),
    )


def suite_construct(rng: np.random.Generator, sizes: VerifySizes) -> List[CheckResult]:
    faithfulness = 0.0
    for _ in range(sizes.double_width_schedules):
        spec = random_schedule(rng, rng.uniform(-0.5, 2.0))
        system = build_double_width(spec)
        z0 = rng.uniform(-1.0, 1.0, size=spec.dim)
        _, reference = signed_flow_trajectory(spec, z0)
        fp = FlowProblem(system.path, LatentState(system.lift(z0)), spec.activation)
        _, states = trajectory(fp)
        checkpoints = np.linspace(0, len(states) - 1, 10).astype(int)
        for index in checkpoints:
            error = np.max(np.abs(system.read(states[index]) - reference[index]))
            faithfulness = max(faithfulness, float(error))

    activation = 0.0
    for _ in range(sizes.activation_flow_samples):
        a = rng.uniform(1e-3, 5.0)
        if a == 1.0:
            continue
        w = rng.uniform(-10.0, 10.0)
        realized, expected = activation_as_flow(a).check(w)
        activation = max(
            activation, abs(float(realized) - float(expected)) / max(1.0, abs(w))
        )

    linear = 0.0
    for _ in range(sizes.skeleton_cases):
        a = rng.uniform(0.1, 3.0)
        if a == 1.0:
            continue
        d = int(rng.integers(1, 4))
        d_x, d_y = (int(n) for n in rng.integers(1, 3, size=2))
        spec = DoubleWidthSpec.zeros(a, d)
        P1 = rng.normal(size=(d, d_x))
        R1 = rng.normal(size=(d_y, d))
        x = rng.uniform(-1.0, 1.0, size=(d_x, 4))
        out = assemble_uap_skeleton(spec, P1, R1)(x)
        linear = max(linear, float(np.max(np.abs(out - R1 @ P1 @ x))))

    return [
        _check("construct", "double_width_faithfulness", faithfulness, 1e-7),
        _check("construct", "activation_flow_identity", activation, 1e-12),
        _check("construct", "zero_schedule_linear", linear, 1e-12),
    ]


def random_gradient_case(
    rng: np.random.Generator,
) -> Tuple[Template, Parameters, np.ndarray, np.ndarray]:
    """
    Small random network with random biases, readout and alphas, plus probes kept
    more than 1e-3 away from every activation kink. The probe set may come back empty.
    """
    depth = int(rng.integers(1, 4))
    template = Template.uniform(
        _random_structure(rng),
        int(rng.integers(1, 4)),
        depth,
        float(rng.choice([0.25, 0.5])),
        float(rng.uniform(-0.5, 0.9)),
    )
    d_x, d_y = (int(n) for n in rng.integers(1, 3, size=2))
    params = init_parameters(template, d_x, d_y, rng)
    params["b"] = rng.uniform(-0.5, 0.5, size=params["b"].shape)
    params["readout"] = rng.uniform(-1.0, 1.0, size=params["readout"].shape)
    if template.trains_alpha:
        low, high = alpha_window(template.activation, template.dt)
        params["alpha"] = np.clip(rng.uniform(-0.5, 0.5, size=depth), low, high)
    inputs = rng.uniform(-1.0, 1.0, size=(d_x, 12))
    inputs = inputs[:, kink_distance(template, params, inputs) > 1e-3]
    targets = rng.uniform(-1.0, 1.0, size=(d_y, inputs.shape[1]))
    return template, params, inputs, targets


def suite_gradient(rng: np.random.Generator, sizes: VerifySizes) -> List[CheckResult]:
    worst = 0.0
    checked = 0
    for _ in range(sizes.gradient_networks):
        template, params, inputs, targets = random_gradient_case(rng)
        if inputs.shape[1] == 0:
            continue
        errors = gradient_check(template, params, inputs, targets)
        worst = max(worst, max(errors.values()))
        checked += 1
    return [
        _check("gradient", "reverse_vs_central_difference", worst, 1e-4),
        _check(
            "gradient", "networks_checked", checked, sizes.gradient_networks // 2, ">="
        ),
    ]


SuiteFunction = Callable[[np.random.Generator, VerifySizes], List[CheckResult]]

SUITE_FUNCTIONS: Dict[str, SuiteFunction] = {
    "core": suite_core,
    "flow": suite_flow,
    "discretize": suite_discretize,
    "conv": suite_conv,
    "construct": suite_construct,
    "gradient": suite_gradient,
}


def _suite_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([seed, SUITES.index(name)])


def run_suites(
    suite: str = "all", seed: int = 0, sizes: Optional[VerifySizes] = None
) -> List[CheckResult]:
    """
    Run one suite or all of them.

    Raises:
        ValueError: If `suite` is unknown.
    """
    if suite != "all" and suite not in SUITE_FUNCTIONS:
        raise ValueError("unknown suite %r, choose from %s or all" % (suite, SUITES))
    sizes = sizes or VerifySizes()
    names = SUITES if suite == "all" else (suite,)
    results: List[CheckResult] = []
    for name in names:
        rng = _suite_rng(seed, name)
        suite_results = SUITE_FUNCTIONS[name](rng, sizes)
        for result in suite_results:
            log = logger.info if result.passed else logger.warning
            log(result.line())
        results.extend(suite_results)
    return results


def format_report(results: List[CheckResult]) -> str:
    failed = sum(not result.passed for result in results)
    lines = [result.line() for result in results]
    lines.append("%d checks, %d failed" % (len(results), failed))
    return "\n".join(lines)
