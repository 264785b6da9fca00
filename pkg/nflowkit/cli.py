"""
Command-line interface
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from .config import RunConfig, TrainConfig
from .core import LatentState
from .discretize import compile_path, merge_affine
from .errors import (
    AlignmentError,
    DivergenceError,
    DomainError,
    FormatError,
    StructureError,
)
from .flow import FlowProblem, integrate_reference
from .io_model import write_model
from .io_text import (
    read_grid_dataset,
    read_states,
    write_manifest,
    write_states,
    write_table,
)
from .io_yaml import read_path, read_yaml, write_path
from .params import Structure, time_correct
from .train import fit, fit_operator, sup_error
from .verify import SUITES, convergence_table, format_report, run_suites

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

SCHEMES = {"euler": Structure.COMPOSITION, "split": Structure.SEPARATION}


class UsageError(Exception):
    """Arguments that parse but do not fit together."""


def positive_int(value: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected an integer, got %r" % value)
    if number < 1:
        raise argparse.ArgumentTypeError("must be >= 1, got %d" % number)
    return number


def positive_float(value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number, got %r" % value)
    if not number > 0:
        raise argparse.ArgumentTypeError("must be > 0, got %r" % value)
    return number


def nonnegative_float(value: str) -> float:
    try:
        number = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected a number, got %r" % value)
    if not number >= 0:
        raise argparse.ArgumentTypeError("must be >= 0, got %r" % value)
    return number


def _output_directory(out: Optional[str]) -> Path:
    directory = Path(out).parent if out else Path(".")
    directory.mkdir(parents=True, exist_ok=True)
    return directory


def _run_config(args: argparse.Namespace, **overrides: Any) -> RunConfig:
    """Run options from the optional config file, overridden by the flags."""
    mapping = read_yaml(args.config) if args.config else None
    try:
        base = RunConfig.from_mapping(mapping)
        return base.with_overrides(command=args.command, **overrides)
    except ValueError as error:
        raise UsageError(str(error)) from error


def cmd_integrate(args: argparse.Namespace) -> int:
    """z(T) of a path document from a state CSV, written as a state CSV."""
    config = _run_config(
        args, path=args.path, states=args.states, out=args.out, substeps=args.substeps
    )
    path, fam, kind = read_path(config.path)
    if kind.is_grid:
        raise FormatError("integrate reads scalar-channel paths, got a grid path")
    initial = read_states(config.states)
    state = integrate_reference(
        FlowProblem(path, LatentState(initial), fam), config.substeps
    )
    directory = _output_directory(config.out)
    write_states(config.out, state.data)
    write_manifest(
        directory,
        dict(config.to_dict(), total_time=path.total_time, probes=initial.shape[1]),
    )
    logger.info("integrated %d probes up to T=%g", initial.shape[1], path.total_time)
    return EXIT_OK


def cmd_discretize(args: argparse.Namespace) -> int:
    """Time-correct, compile and optionally merge a path into a model document."""
    config = _run_config(
        args,
        path=args.path,
        out=args.out,
        dt=args.dt,
        scheme=args.scheme,
        merge=args.merge or None,
        shift_tolerance=args.shift_tolerance,
    )
    if config.dt is None or config.scheme is None:
        raise UsageError("discretize needs --dt and --scheme")
    if config.scheme not in SCHEMES:
        raise UsageError(
            "unknown scheme %r, choose from %s" % (config.scheme, list(SCHEMES))
        )
    path, fam, kind = read_path(config.path)
    if path.structure is not SCHEMES[config.scheme]:
        raise UsageError(
            "scheme %s needs a %s path, got %s"
            % (config.scheme, SCHEMES[config.scheme].value, path.structure.value)
        )
    if config.merge and config.scheme != "split":
        raise UsageError("--merge applies to the split scheme only")

    corrected, max_shift = time_correct(path, config.dt)
    if config.shift_tolerance is not None and max_shift > config.shift_tolerance:
        raise DomainError(
            "time correction at dt=%g shifts breakpoints by %g, above %g"
            % (config.dt, max_shift, config.shift_tolerance)
        )
    net = compile_path(corrected, config.dt, fam, kind)
    depth = net.depth
    if config.merge:
        net = merge_affine(net)
    directory = _output_directory(config.out)
    write_model(config.out, net)
    write_manifest(
        directory,
        dict(
            config.to_dict(),
            layers=depth,
            merged_layers=net.depth,
            max_shift=max_shift,
            total_time=corrected.total_time,
        ),
    )
    logger.info("wrote %d-layer network to %s", net.depth, config.out)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    """Run property suites, print the report, fail with exit code 4 on any failure."""
    config = _run_config(args, suite=args.suite, seed=args.seed, out=args.out)
    if config.suite != "all" and config.suite not in SUITES:
        raise UsageError("unknown suite %r" % config.suite)
    results = run_suites(config.suite, config.seed)
    report = format_report(results)
    print(report)
    failed = [result.name for result in results if not result.passed]
    if config.out:
        directory = _output_directory(config.out)
        Path(config.out).write_text(report + "\n")
        if config.suite in ("all", "discretize"):
            columns, rows = convergence_table(config.seed)
            write_table(directory / "convergence.csv", columns, rows)
        write_manifest(
            directory,
            dict(config.to_dict(), checks=len(results), failed=",".join(failed)),
        )
    return EXIT_NUMERIC if failed else EXIT_OK


def _train_config(args: argparse.Namespace) -> TrainConfig:
    config = TrainConfig.from_mapping(read_yaml(args.config))
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if overrides:
        config = replace(config, **overrides)
    if not config.out:
        raise UsageError(
            "training needs an output directory (--out or 'out' in config)"
        )
    return config


def _write_metrics(directory: Path, metrics: Dict[str, float]) -> None:
    write_table(
        directory / "metrics.csv",
        ["metric", "value"],
        [[key, float(value)] for key, value in metrics.items()],
    )


def cmd_train(args: argparse.Namespace) -> int:
    """Fit a function target; write model, path, loss curve, metrics and manifest."""
    config = _train_config(args)
    if config.task != "function":
        raise UsageError(
            "train runs function tasks; use train-operator for %r" % config.task
        )
    task = config.fit_task(read_states)
    template = config.template.build()
    result = fit(task, template)

    directory = Path(config.out)
    directory.mkdir(parents=True, exist_ok=True)
    write_model(directory / "model.json", result.network)
    write_path(directory / "path.yaml", result.path, template.activation)
    write_table(
        directory / "losses.csv",
        ["iteration", "loss"],
        [[i, float(loss)] for i, loss in enumerate(result.losses)],
    )
    metrics = {
        "best_loss": result.best_loss,
        "best_iteration": result.best_iteration,
        "sup_error": sup_error(result.network, task.inputs, task.targets),
    }
    _write_metrics(directory, metrics)
    write_manifest(directory, dict(config.flat(), **metrics))
    print(" ".join("%s=%.6g" % item for item in metrics.items()))
    return EXIT_OK


def cmd_train_operator(args: argparse.Namespace) -> int:
    """Fit an operator target; write the operator model, metrics and manifest."""
    config = _train_config(args)
    if config.task != "operator":
        raise UsageError("train-operator runs operator tasks, got %r" % config.task)
    task, frame = config.operator_task(read_grid_dataset)
    model, metrics = fit_operator(task, frame, config.template.build())

    directory = Path(config.out)
    directory.mkdir(parents=True, exist_ok=True)
    write_model(directory / "model.json", model)
    _write_metrics(directory, metrics)
    write_manifest(directory, dict(config.flat(), **metrics))
    print(" ".join("%s=%.6g" % item for item in metrics.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nflowkit",
        description="Neural flows, their discretizations and operator constructions",
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    integrate = subparsers.add_parser(
        "integrate", help="reference integration of a path"
    )
    integrate.add_argument("path", help="parameter-path document (YAML or JSON)")
    integrate.add_argument("states", help="initial states CSV")
    integrate.add_argument("--substeps", type=positive_int, default=None)
    integrate.add_argument("--out", required=True, help="output state CSV")
    integrate.add_argument("--config", help="run config YAML")
    integrate.set_defaults(handler=cmd_integrate)

    disc = subparsers.add_parser("discretize", help="compile a path into a network")
    disc.add_argument("path", help="parameter-path document (YAML or JSON)")
    disc.add_argument("--dt", type=positive_float, default=None)
    disc.add_argument("--scheme", choices=sorted(SCHEMES), default=None)
    disc.add_argument("--merge", action="store_true", help="merge affine layer runs")
    disc.add_argument(
        "--shift-tolerance",
        type=nonnegative_float,
        default=None,
        help="fail when time correction moves a breakpoint further than this",
    )
    disc.add_argument("--out", required=True, help="output model document")
    disc.add_argument("--config", help="run config YAML")
    disc.set_defaults(handler=cmd_discretize)

    verify = subparsers.add_parser("verify", help="run property suites")
    verify.add_argument("--suite", choices=SUITES + ("all",), default=None)
    verify.add_argument("--seed", type=int, default=None)
    verify.add_argument("--out", default=None, help="also write the report here")
    verify.add_argument("--config", help="run config YAML")
    verify.set_defaults(handler=cmd_verify)

    for name, handler in (("train", cmd_train), ("train-operator", cmd_train_operator)):
        train = subparsers.add_parser(name, help="fit from a training config")
        train.add_argument("config", help="training config YAML")
        train.add_argument("--seed", type=int, default=None)
        train.add_argument("--out", default=None, help="output directory")
        train.set_defaults(handler=handler)

    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return EXIT_OK if error.code == 0 else EXIT_USAGE
    _configure_logging(args.verbose)

    try:
        return args.handler(args)
    except UsageError as error:
        print("usage error: %s" % error, file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, FormatError, StructureError) as error:
        print("data error: %s" % error, file=sys.stderr)
        return EXIT_DATA
    except (DomainError, AlignmentError, DivergenceError) as error:
        print("numeric error: %s" % error, file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as error:
        print("data error: %s" % error, file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
