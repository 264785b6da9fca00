"""
Run and training configuration
"""

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from .errors import FormatError
from .operator import BasisFrame, antiderivative_dataset, fourier_frame
from .params import Structure
from .train import Budget, FitTask, OperatorTask, Template

FUNCTION_TARGETS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "linear": lambda x: 2.0 * x,
    "abs": np.abs,
    "sin": lambda x: np.sin(np.pi * x),
}

OPERATOR_TARGETS = ("identity", "antiderivative")


def _from_mapping(cls, mapping: Optional[Mapping[str, Any]], section: str):
    if mapping is None:
        return cls()
    if not isinstance(mapping, Mapping):
        raise FormatError("%s must be a mapping, got %r" % (section, mapping))
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(mapping) - known)
    if unknown:
        raise FormatError("unknown %s keys: %s" % (section, ", ".join(unknown)))
    try:
        return cls(**mapping)
    except (TypeError, ValueError) as error:
        raise FormatError("invalid %s: %s" % (section, error)) from error


@dataclass(frozen=True)
class RunConfig:
    """
    Options shared by integrate, discretize and verify.

    Args:
        command (str): Subcommand name.
        path (Optional[str]): Parameter-path document.
        states (Optional[str]): Initial states CSV.
        out (Optional[str]): Output file.
        dt (Optional[float]): Step of the discretization.
        scheme (Optional[str]): 'euler' or 'split'.
        merge (bool): Merge affine runs after compiling. Defaults to False.
        substeps (int): RK4 steps per segment. Defaults to 64.
        seed (int): Random seed. Defaults to 0.
        suite (str): Verification suite. Defaults to 'all'.
        shift_tolerance (Optional[float]): Largest accepted breakpoint shift of the
            time correction in discretize. Defaults to None, which accepts any shift.

    Raises:
        ValueError: If substeps < 1, dt <= 0 or shift_tolerance < 0.
    """

    command: str = ""
    path: Optional[str] = None
    states: Optional[str] = None
    out: Optional[str] = None
    dt: Optional[float] = None
    scheme: Optional[str] = None
    merge: bool = False
    substeps: int = 64
    seed: int = 0
    suite: str = "all"
    shift_tolerance: Optional[float] = None

    def __post_init__(self):
        if isinstance(self.substeps, bool) or not isinstance(self.substeps, int):
            raise ValueError("substeps must be an integer, got %r" % (self.substeps,))
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1, got %d" % self.substeps)
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be > 0, got %r" % (self.dt,))
        if self.shift_tolerance is not None and not self.shift_tolerance >= 0:
            raise ValueError(
                "shift_tolerance must be >= 0, got %r" % (self.shift_tolerance,)
            )

    @classmethod
    def from_mapping(cls, mapping: Optional[Mapping[str, Any]]) -> "RunConfig":
        return _from_mapping(cls, mapping, "run config")

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Copy with every non-None override applied."""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class TemplateConfig:
    structure: str = "separation"
    width: int = 8
    depth: int = 16
    dt: float = 1.0 / 16
    slope: float = 0.0
    train_alpha: bool = True
    alpha_init: float = 0.0
    weight_scale: float = 0.5
    symmetric_lift: bool = True

    def build(self) -> Template:
        return Template.uniform(
            Structure(self.structure),
            self.width,
            self.depth,
            self.dt,
            self.slope,
            train_alpha=self.train_alpha,
            alpha_init=self.alpha_init,
            weight_scale=self.weight_scale,
            symmetric_lift=self.symmetric_lift,
        )


@dataclass(frozen=True)
class TargetConfig:
    """
    What to fit.

    Function tasks use `name` from FUNCTION_TARGETS on `probes` equispaced points of
    [low, high], or CSV files `inputs` / `targets` in the state format. Operator tasks
    use `name` from OPERATOR_TARGETS with `count` random band-limited inputs of
    `modes` modes on an `n` grid, or grid dataset files `inputs` / `targets`.
    """

    name: Optional[str] = None
    inputs: Optional[str] = None
    targets: Optional[str] = None
    probes: int = 201
    low: float = -1.0
    high: float = 1.0
    n: int = 64
    k: int = 9
    m: int = 9
    modes: int = 4
    count: int = 200
    holdout: float = 0.2


@dataclass(frozen=True)
class TrainConfig:
    """
    A training run: task kind, target, template, budget, seed and output directory.
    """

    task: str = "function"
    target: TargetConfig = field(default_factory=TargetConfig)
    template: TemplateConfig = field(default_factory=TemplateConfig)
    budget: Budget = field(default_factory=Budget)
    seed: int = 0
    out: Optional[str] = None

    @classmethod
    def from_mapping(cls, mapping: Optional[Mapping[str, Any]]) -> "TrainConfig":
        """
        Build from a parsed YAML document with sections target, template and budget.

        Raises:
            FormatError: On unknown keys or invalid values.
        """
        mapping = dict(mapping or {})
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise FormatError("unknown train config keys: %s" % ", ".join(unknown))
        config = cls(
            task=str(mapping.get("task", "function")),
            target=_from_mapping(TargetConfig, mapping.get("target"), "target"),
            template=_from_mapping(TemplateConfig, mapping.get("template"), "template"),
            budget=_from_mapping(Budget, mapping.get("budget"), "budget"),
            seed=int(mapping.get("seed", 0)),
            out=mapping.get("out"),
        )
        if config.task not in ("function", "operator"):
            raise FormatError(
                "task must be 'function' or 'operator', got %r" % config.task
            )
        try:
            Structure(config.template.structure)
        except ValueError as error:
            raise FormatError(str(error)) from error
        return config

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def flat(self) -> Dict[str, Any]:
        """Dotted keys for manifests."""
        flat: Dict[str, Any] = {"task": self.task, "seed": self.seed, "out": self.out}
        for section in ("target", "template", "budget"):
            for key, value in asdict(getattr(self, section)).items():
                flat["%s.%s" % (section, key)] = value
        return flat

    def fit_task(
        self, read_states: Callable[[Union[str, Path]], np.ndarray]
    ) -> FitTask:
        """
        Probes and targets of a function task.

        Raises:
            FormatError: If neither a known target name nor data files are given.
        """
        target = self.target
        if target.inputs and target.targets:
            inputs, targets = read_states(target.inputs), read_states(target.targets)
        elif target.name in FUNCTION_TARGETS:
            inputs = np.linspace(target.low, target.high, target.probes)[None]
            targets = FUNCTION_TARGETS[target.name](inputs)
        else:
            raise FormatError(
                "function target must be one of %s or data files, got %r"
                % (sorted(FUNCTION_TARGETS), target.name)
            )
        return FitTask(inputs, targets, self.budget, self.seed)

    def operator_task(
        self, read_grid_dataset: Callable[[Union[str, Path]], np.ndarray]
    ) -> Tuple[OperatorTask, BasisFrame]:
        """
        Dataset and Fourier frame of an operator task.

        Raises:
            FormatError: If neither a known target name nor data files are given.
        """
        target = self.target
        if target.inputs and target.targets:
            inputs = read_grid_dataset(target.inputs)
            outputs = read_grid_dataset(target.targets)
            n = inputs.shape[1]
        elif target.name in OPERATOR_TARGETS:
            rng = np.random.default_rng(self.seed)
            n = target.n
            inputs, outputs = antiderivative_dataset(rng, target.count, n, target.modes)
            if target.name == "identity":
                outputs = inputs.copy()
        else:
            raise FormatError(
                "operator target must be one of %s or data files, got %r"
                % (list(OPERATOR_TARGETS), target.name)
            )
        task = OperatorTask(inputs, outputs, self.budget, self.seed, target.holdout)
        return task, fourier_frame(n, target.k, target.m)
