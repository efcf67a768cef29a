#!/usr/bin/env python

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import structlog
from jsonschema_rs import validator_for

from fitnets._io import atomic_write_bytes, atomic_write_text, decode_json, encode_json
from fitnets._version import __version__
from fitnets.config import RunConfig, load_config, write_config
from fitnets.data.pipeline import Splits, load_dataset_uri, prepare_splits
from fitnets.errors import ConfigError, FitNetsError
from fitnets.netarch.counting import compression_record, infer_shapes, layer_depth
from fitnets.netarch.types import ArchitectureSpec
from fitnets.netarch.zoo import resolve_architecture
from fitnets.splash import SPLASH
from fitnets.tensor.ops import set_default_dtype
from fitnets.train.checkpoint import load_checkpoint, save_checkpoint
from fitnets.train.loop import evaluate, train_fitnet, train_supervised
from fitnets.train.network import Network
from fitnets.train.params import init_params
from fitnets.train.report import TrainReport, write_report
from fitnets.verify import CHECKS, run_gradcheck_suite

logger = structlog.getLogger(__name__)

EVAL_RECORD_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "EvalRecord",
    "type": "object",
    "properties": {
        "checkpoint": {"type": "string"},
        "dataset": {"type": "string"},
        "error": {"type": "number", "minimum": 0, "maximum": 1},
        "n": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
    },
    "required": ["checkpoint", "dataset", "error", "n", "seed"],
    "additionalProperties": False,
}
_eval_validator = validator_for(EVAL_RECORD_SCHEMA)


# ANSI color codes
class Colors:
    RED = "\033[91m"
    END = "\033[0m"


def print_error(message: str) -> None:
    """Print an error message to stderr, in red if the terminal supports colors."""
    if sys.stderr.isatty() and os.environ.get("TERM") != "dumb":
        print(f"{Colors.RED}Error: {message}{Colors.END}", file=sys.stderr)
    else:
        print(f"Error: {message}", file=sys.stderr)


def configure_logging(verbosity: int = 0) -> None:
    """Key/value logs on stderr; stdout carries only command output."""
    level = logging.DEBUG if verbosity > 0 else logging.INFO
    structlog.configure(
        processors=[
            structlog.processors.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.dev.ConsoleRenderer(colors=False),
        ],
        wrapper_class=structlog.make_filtering_bound_logger(level),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def _load_run_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["out"] = args.out
    if getattr(args, "mode", None) is not None:
        overrides["mode"] = args.mode
    if overrides:
        config = config.model_copy(update={"run": config.run.model_copy(update=overrides)})
    set_default_dtype(config.run.dtype)
    return config


def _splits(config: RunConfig) -> Splits:
    if config.data is None:
        raise ConfigError("a [data] section is required", field="data")
    return prepare_splits(config.data)


def _summarize(report: TrainReport) -> str:
    parts = [
        f"{report.stage}: {len(report.epochs)} epochs",
        f"best epoch {report.best_epoch}",
        f"validation {report.validation_metric} {report.best_validation_error:.4f}",
    ]
    if report.test_error is not None:
        parts.append(f"test error {report.test_error:.4f}")
    parts.append(f"checksum {report.checksum()[:12]}")
    return ", ".join(parts)


def cmd_train_teacher(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    if config.teacher is None:
        raise ConfigError("a [teacher] section is required", field="teacher")
    arch = config.teacher.resolve("teacher")
    data = _splits(config)
    params, report = train_supervised(
        arch,
        data,
        config.optimizer,
        config.early_stop,
        config.run.seed,
        halfwidth=config.run.init_halfwidth,
        flip=config.data.flip if config.data else False,
    )
    out = Path(config.run.out)
    save_checkpoint(out / "teacher.fitn", arch, params)
    write_report(report, out, "teacher")
    atomic_write_text(out / "config.txt", write_config(config, resolved={"teacher": arch}))
    print(_summarize(report))
    return 0


def cmd_distill(args: argparse.Namespace) -> int:
    config = _load_run_config(args)
    if config.student is None:
        raise ConfigError("a [student] section is required", field="student")
    student = config.student.resolve("student")
    mode = config.run.mode
    if config.teacher is None or config.teacher.checkpoint is None:
        if mode != "backprop":
            raise ConfigError(
                f"mode {mode} needs 'checkpoint = PATH' in [teacher]", field="teacher.checkpoint"
            )
        teacher = None
    else:
        teacher = load_checkpoint(config.teacher.checkpoint)
    data = _splits(config)
    if teacher is None:
        params, report = train_supervised(
            student,
            data,
            config.optimizer,
            config.early_stop,
            config.run.seed,
            halfwidth=config.run.init_halfwidth,
            flip=config.data.flip if config.data else False,
        )
        reports = {"supervised": report}
    else:
        params, reports = train_fitnet(
            teacher,
            student,
            config.distill,
            data,
            config.optimizer,
            config.early_stop,
            mode=mode,
            seed=config.run.seed,
            halfwidth=config.run.init_halfwidth,
            skip_stage1=config.run.skip_stage1,
            flip=config.data.flip if config.data else False,
        )

    out = Path(config.run.out)
    save_checkpoint(out / "student.fitn", student, params)
    for stage, report in reports.items():
        write_report(report, out, stage)
    summary = {
        "mode": mode,
        "seed": config.run.seed,
        "student": student.name,
        "teacher": None if teacher is None else teacher.arch.name,
        "stages": {
            stage: {
                "epochs": len(report.epochs),
                "best_epoch": report.best_epoch,
                "best_validation_error": report.best_validation_error,
                "test_error": report.test_error,
                "checksum": report.checksum(),
            }
            for stage, report in reports.items()
        },
    }
    atomic_write_bytes(out / "summary.json", encode_json(summary))
    atomic_write_text(out / "config.txt", write_config(config, resolved={"student": student}))
    for report in reports.values():
        print(_summarize(report))
    return 0


def _time_forward(arch: ArchitectureSpec, images: np.ndarray, seed: int, repeats: int = 3) -> float:
    """Best-of-``repeats`` seconds per example of a forward pass with random weights."""
    net = Network(arch)
    params = init_params(arch, 0.005, seed)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        net.forward_batched(images, params)
        best = min(best, time.perf_counter() - start)
    return best / len(images)


def cmd_inspect(args: argparse.Namespace) -> int:
    archs = [resolve_architecture(ref) for ref in args.archs]
    timings: dict[str, float] = {}
    if args.time:
        if not args.data:
            raise ConfigError("--time needs --data URI")
        images = load_dataset_uri(args.data).images[: args.time_examples]
        for i, arch in enumerate(archs):
            if arch.input_shape != images.shape[1:]:
                archs[i] = arch = arch.with_input_shape(images.shape[1:])  # type: ignore[arg-type]
            timings[arch.name] = _time_forward(arch, images, args.seed or 0)

    rows = []
    traces = [infer_shapes(arch) for arch in archs]
    reference, reference_trace = archs[0], traces[0]
    for arch, trace in zip(archs, traces):
        row = {
            "name": arch.name,
            "layers": layer_depth(arch),
            "params": trace.total_params,
            "mults": trace.total_mults,
        }
        if len(archs) > 1:
            timing = None
            if timings:
                timing = (timings[reference.name], timings[arch.name])
            ratios = compression_record(
                reference_trace.total_params,
                trace.total_params,
                reference_trace.total_mults,
                trace.total_mults,
                timing,
            )
            row["speedup"] = f"{ratios['analytic_speedup']:.2f}"
            row["compression"] = f"{ratios['compression_rate']:.2f}"
            if ratios["measured_speedup"] is not None:
                row["measured_speedup"] = f"{ratios['measured_speedup']:.2f}"
        if timings:
            row["seconds_per_example"] = f"{timings[arch.name]:.6f}"
        rows.append(row)

    columns = list(rows[0])
    widths = {c: max(len(c), *(len(str(r[c])) for r in rows)) for c in columns}
    print("  ".join(f"{c.upper():<{widths[c]}}" for c in columns))
    for row in rows:
        print("  ".join(f"{str(row[c]):<{widths[c]}}" for c in columns))
    if args.out:
        csv_text = ",".join(columns) + "\n" + "".join(
            ",".join(str(row[c]) for c in columns) + "\n" for row in rows
        )
        atomic_write_text(Path(args.out) / "inspect.csv", csv_text)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    if args.data:
        dataset = load_dataset_uri(args.data, split="test")
        source = args.data
    else:
        if not args.config:
            raise ConfigError("eval needs --data URI or --config PATH")
        data = _splits(_load_run_config(args))
        dataset = data.test if data.test is not None else data.validation
        source = args.config
    error = evaluate(checkpoint.params, checkpoint.arch, dataset)
    record = {
        "checkpoint": str(args.checkpoint),
        "dataset": source,
        "error": error,
        "n": len(dataset),
        "seed": args.seed or 0,
    }
    _eval_validator.validate(decode_json(encode_json(record)))
    print(f"{error:.4f}")
    if args.out:
        atomic_write_bytes(Path(args.out) / "eval.json", encode_json(record))
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    results = run_gradcheck_suite(args.op, cases=args.cases, seed=args.seed or 0, corrupt=args.corrupt)
    width = max(len(r.op) for r in results)
    for r in results:
        status = "ok" if r.passed else "FAIL"
        print(f"{r.op:<{width}}  {r.max_relative_error:.3e}  {status}")
    failed = [r.op for r in results if not r.passed]
    if failed:
        print_error(f"gradient check failed for: {', '.join(failed)}")
        return 1
    return 0


def get_usage_examples() -> str:
    """Return usage examples for the command line interface."""
    return """
Examples:
  # Train a teacher from a run file
  fitnets train-teacher --config teacher.cfg --out runs/teacher

  # Distill a student with hints, then KD
  fitnets distill --config student.cfg --mode ht --seed 1

  # Compare architectures
  fitnets inspect desk-teacher desk-student --out runs/inspect

  # Misclassification rate of a checkpoint
  fitnets eval --checkpoint runs/teacher/teacher.fitn --data synth://0/500/10/1x14x14

  # Verify hand-written gradients
  fitnets gradcheck --op conv2d maxout
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fitnets",
        description="Hint-based distillation of thin deep networks",
        epilog=get_usage_examples(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="store_true", help="Show version information and exit")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Debug logging")
    sub = parser.add_subparsers(dest="command")

    def common(p: argparse.ArgumentParser, *, config: bool = True) -> None:
        if config:
            p.add_argument("--config", type=str, required=True, help="Run configuration file")
        p.add_argument("--seed", type=int, default=None, help="Override the run seed")
        p.add_argument("--out", type=str, default=None, help="Output directory")

    p = sub.add_parser("train-teacher", help="Train a network on labels and save a checkpoint")
    common(p)
    p.set_defaults(handler=cmd_train_teacher)

    p = sub.add_parser("distill", help="Train a student from a teacher checkpoint")
    common(p)
    p.add_argument("--mode", choices=["ht", "kd", "backprop"], default=None, help="Training mode")
    p.set_defaults(handler=cmd_distill)

    p = sub.add_parser("inspect", help="Layer, parameter and multiplication counts")
    p.add_argument("archs", nargs="+", help="Architecture names or layer files; the first is the reference")
    p.add_argument("--time", action="store_true", help="Also measure forward wall-clock")
    p.add_argument("--data", type=str, default=None, help="Dataset URI for --time")
    p.add_argument("--time-examples", type=int, default=256, help="Examples timed per architecture")
    common(p, config=False)
    p.set_defaults(handler=cmd_inspect)

    p = sub.add_parser("eval", help="Misclassification rate of a checkpoint")
    p.add_argument("--checkpoint", type=str, required=True)
    p.add_argument("--data", type=str, default=None, help="Dataset URI")
    p.add_argument("--config", type=str, default=None, help="Run file whose [data] pipeline to use")
    common(p, config=False)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("gradcheck", help="Finite-difference check of every op and loss")
    p.add_argument("--op", nargs="+", choices=sorted(CHECKS), default=None, help="Restrict to these ops")
    p.add_argument("--cases", type=int, default=20, help="Random cases per op")
    p.add_argument("--corrupt", action="store_true", help="Double analytic gradients (must fail)")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=cmd_gradcheck)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if args.version:
        print(f"fitnets v{__version__}")
        return 0
    if args.command is None:
        print(SPLASH)
        parser.print_help()
        return 2
    configure_logging(args.verbose)
    try:
        return args.handler(args)
    except FitNetsError as e:
        logger.debug("command_failed", command=args.command, error=repr(e))
        print_error(str(e))
        return e.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
