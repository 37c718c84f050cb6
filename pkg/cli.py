"""
Command-line front end of the gesture pipeline.

    python cli.py synth   --subjects 4 --reps 20 --seed 42 --out data/
    python cli.py extract --data data/ --out features.csv
    python cli.py augment --features features.csv --out augmented.csv
    python cli.py train   --features augmented.csv --out models/
    python cli.py eval    --features augmented.csv --models models/ --out results/

Exit codes: 0 success, 1 validation error, 2 runtime or divergence error.
Every subcommand writes a run manifest echoing its resolved configuration.
"""

import argparse
import json
import sys
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from pydantic import BaseModel, Field, ValidationError

import features as feat
import master_slave as ms
import signal_model
import storage
from errors import DataError, IngestionError, PipelineError
from logger_config import RunLogger, get_logger, setup_logging
from lstm_augment import AugmentConfig, GeneratorConfig, augment_features
from models import Architecture, FeatureConfig, SplitConfig, SplitManifest, TrainConfig

logger = get_logger(__name__)
error_logger = get_logger("errors")

RUN_MANIFEST_NAME = "run_manifest.json"
SPLIT_MANIFEST_NAME = "split_manifest.json"
MODEL_FILE = "model.json"
ARCH_CHOICES = {
    "master-slave": [Architecture.MASTER_SLAVE],
    "conventional": [Architecture.CONVENTIONAL],
    "both": [Architecture.MASTER_SLAVE, Architecture.CONVENTIONAL],
}
ARCH_DIRS = {Architecture.MASTER_SLAVE: "master_slave", Architecture.CONVENTIONAL: "conventional"}


class RunConfig(BaseModel):
    """
    Resolved configuration of one CLI invocation.

    Attributes:
        command (str): Subcommand name
        parameters (Dict[str, Any]): Every flag after defaults are applied
        seeds (Dict[str, int]): Every seed that influenced the outputs
    """
    command: str = Field(..., description="Subcommand name")
    parameters: Dict[str, Any] = Field(default_factory=dict, description="Resolved flags")
    seeds: Dict[str, int] = Field(default_factory=dict, description="Named seeds")


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that exits with the validation code 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _bounded_int(minimum: int):
    def parse(text: str) -> int:
        try:
            value = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid integer: {text!r}")
        if value < minimum:
            raise argparse.ArgumentTypeError(f"must be ≥ {minimum}, got {value}")
        return value
    return parse


positive_int = _bounded_int(1)
non_negative_int = _bounded_int(0)


def positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number: {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def non_negative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be ≥ 0, got {value}")
    return value


class RunContext:
    """Per-invocation run id plus stage bookkeeping in the run log."""

    def __init__(self, command: str, run_logger: RunLogger):
        self.run_id = str(uuid.uuid4())
        self.command = command
        self.run_logger = run_logger

    @contextmanager
    def stage(self, name: str, details: Optional[Dict[str, Any]] = None):
        started = time.time()
        details = {} if details is None else details
        try:
            yield details
        except Exception as e:
            error = e.to_detail() if isinstance(e, PipelineError) else {"type": type(e).__name__, "details": str(e)}
            self.run_logger.log_stage(
                self.run_id, self.command, name, success=False, error=error,
                duration_ms=(time.time() - started) * 1000, details=details,
            )
            raise
        self.run_logger.log_stage(
            self.run_id, self.command, name, success=True,
            duration_ms=(time.time() - started) * 1000, details=details,
        )


def _parameters(args: argparse.Namespace) -> Dict[str, Any]:
    skip = {"func", "log_level", "log_dir"}
    resolved = {}
    for key in sorted(vars(args)):
        if key in skip:
            continue
        value = getattr(args, key)
        resolved[key] = str(value) if isinstance(value, Path) else value
    return resolved


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(f"{path.stem}_{suffix}")


def _write_run_manifest(path: Path, args: argparse.Namespace, seeds: Dict[str, int]) -> Path:
    config = RunConfig(command=args.command, parameters=_parameters(args), seeds=seeds)
    return storage.write_json(path, config.model_dump(mode="json"))


def cmd_synth(args: argparse.Namespace, ctx: RunContext) -> int:
    """Generate the synthetic corpus and persist it as CSVs plus a manifest."""
    with ctx.stage("generate") as details:
        segments = signal_model.generate_synthetic_recordings(args.subjects, args.reps, args.seed)
        details["segments"] = len(segments)
    with ctx.stage("save") as details:
        manifest = signal_model.save_dataset(segments, args.out)
        details["manifest"] = str(manifest)
    _write_run_manifest(Path(args.out) / RUN_MANIFEST_NAME, args, {"dataset": args.seed})
    print(f"Wrote {len(segments)} recordings to {args.out}")
    return 0


def cmd_extract(args: argparse.Namespace, ctx: RunContext) -> int:
    """Extract one feature row per segment of a dataset directory."""
    config = FeatureConfig(ar_order=args.ar_order)
    with ctx.stage("load") as details:
        segments = signal_model.load_dataset(args.data, args.manifest)
        if not segments:
            raise IngestionError(f"dataset {args.data} lists no recordings", path=str(args.data))
        details["segments"] = len(segments)
    with ctx.stage("extract") as details:
        vectors = feat.extract_all(segments, config, workers=args.workers)
        details["dimension"] = config.dimension
    out = Path(args.out)
    storage.write_feature_table(out, vectors, config.dimension)
    _write_run_manifest(_sibling(out, RUN_MANIFEST_NAME), args, {})
    print(f"Wrote {len(vectors)} feature rows ({config.dimension} features) to {out}")
    return 0


def cmd_augment(args: argparse.Namespace, ctx: RunContext) -> int:
    """Append synthetic subjects generated by per-feature LSTMs to a feature table."""
    generator_config = GeneratorConfig(
        hidden_dim=args.hidden_dim,
        epochs=args.epochs,
        learning_rate=args.lstm_learning_rate,
        seed=args.seed,
        sampling=args.sampling,
        workers=args.workers,
    )
    config = AugmentConfig(
        levels=args.levels,
        synthetic_subjects=args.synthetic_subjects,
        length=args.length,
        seed=args.seed,
        generator=generator_config,
    )
    with ctx.stage("load") as details:
        table = storage.read_feature_table(args.features)
        if not table:
            raise DataError(f"feature table {args.features} is empty")
        details["rows"] = len(table)
    with ctx.stage("augment") as details:
        synthetic, grid, generator = augment_features(table, config)
        details["synthetic_rows"] = len(synthetic)

    out = Path(args.out)
    storage.write_feature_table(out, list(table) + synthetic, table[0].dimension)
    storage.save_quantizer(_sibling(out, "quantizer.json"), grid)
    if generator is not None:
        storage.save_generator(_sibling(out, "generator.json"), generator)
    _write_run_manifest(_sibling(out, RUN_MANIFEST_NAME), args, {"augment": args.seed, "generator": args.seed})
    print(f"Wrote {len(table)} real and {len(synthetic)} synthetic rows to {out}")
    return 0


def _cell_dir(root: Path, subject_id: int, arch: Architecture, with_synthetic: bool) -> Path:
    state = "with_synthetic" if with_synthetic else "without_synthetic"
    return root / f"s{subject_id:02d}" / f"{ARCH_DIRS[arch]}_{state}"


def cmd_train(args: argparse.Namespace, ctx: RunContext) -> int:
    """Train the requested architectures per subject and write models plus reports."""
    train_config = TrainConfig(
        iterations=args.iterations,
        learning_rate=args.learning_rate,
        l2_lambda=args.l2_lambda,
        seed=args.seed,
        tolerance=args.tolerance,
    )
    split_config = SplitConfig(test_fraction=args.test_fraction, seed=args.split_seed)
    with ctx.stage("load") as details:
        table = storage.read_feature_table(args.features)
        real = [v for v in table if not v.synthetic]
        synthetic = [v for v in table if v.synthetic]
        subjects = args.subjects or sorted({v.subject_id for v in real})
        if not subjects:
            raise DataError(f"feature table {args.features} has no real subjects")
        details.update(rows=len(table), synthetic_rows=len(synthetic), subjects=subjects)

    def one(subject_id: int) -> ms.SubjectRun:
        return ms.train_subject(
            real, subject_id, split_config, train_config,
            synthetic=synthetic, architectures=ARCH_CHOICES[args.arch],
        )

    with ctx.stage("train") as details:
        if args.workers > 1:
            with ThreadPoolExecutor(max_workers=args.workers) as pool:
                runs = list(pool.map(one, subjects))
        else:
            runs = [one(s) for s in subjects]
        details["cells"] = sum(len(r.cells) for r in runs)

    out = Path(args.out)
    for run in runs:
        for cell in run.cells:
            cell_dir = _cell_dir(out, run.subject_id, cell.arch, cell.with_synthetic)
            storage.save_model(cell_dir / MODEL_FILE, cell.model)
            for name, report in cell.reports.items():
                storage.write_report(cell_dir / cell.model.report_files[name], report)
    storage.write_split_manifest(
        out / SPLIT_MANIFEST_NAME,
        SplitManifest(config=split_config, subjects=[r.split for r in runs]),
    )
    seeds = {"init": args.seed, "split": args.split_seed}
    seeds.update({f"init_{name}": args.seed + offset for name, offset in ms.SEED_OFFSETS.items()})
    _write_run_manifest(out / RUN_MANIFEST_NAME, args, seeds)
    print(f"Trained {sum(len(r.cells) for r in runs)} cells for {len(runs)} subjects into {out}")
    return 0


def _format_percent(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.3f}"


def _format_delta(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:+.3f}"


def render_summary(rows: Sequence, deltas: Sequence[Dict[str, Any]]) -> str:
    """Human-readable accuracy table followed by augmentation deltas."""
    lines = ["subject  arch          synthetic  master    slave     end_to_end"]
    for r in rows:
        lines.append(
            f"{r.subject_id:<8} {r.arch.value:<13} {str(r.with_synthetic).lower():<10} "
            f"{_format_percent(r.master_ca):<9} {_format_percent(r.slave_ca):<9} {_format_percent(r.end_to_end_ca)}"
        )
    lines.append("")
    lines.append("Change from adding synthetic data:")
    for d in deltas:
        flag = "  DECREASED" if d["decreased"] else ""
        lines.append(
            f"subject {d['subject']} {d['arch']}: master {_format_delta(d['master_delta'])}, "
            f"slave {_format_delta(d['slave_delta'])}, end_to_end {_format_delta(d['end_to_end_delta'])}{flag}"
        )
    decreased = [d for d in deltas if d["decreased"]]
    lines.append(f"{len(decreased)} of {len(deltas)} cells decreased after augmentation")
    return "\n".join(lines) + "\n"


def cmd_eval(args: argparse.Namespace, ctx: RunContext) -> int:
    """Evaluate trained models on their held-out splits and write the accuracy table."""
    models_dir = Path(args.models)
    with ctx.stage("load") as details:
        table = storage.read_feature_table(args.features)
        manifest = storage.read_split_manifest(models_dir / SPLIT_MANIFEST_NAME)
        details.update(rows=len(table), subjects=[s.subject_id for s in manifest.subjects])

    rows: List = []
    with ctx.stage("evaluate") as details:
        for split in manifest.subjects:
            _, test = ms.apply_split(table, split)
            for arch in Architecture:
                for with_synthetic in (False, True):
                    path = _cell_dir(models_dir, split.subject_id, arch, with_synthetic) / MODEL_FILE
                    if not path.is_file():
                        continue
                    model = storage.load_model(path)
                    rows.append(ms.evaluate(model, test, with_synthetic, split.subject_id))
        if not rows:
            raise IngestionError(f"no trained models under {models_dir}", path=str(models_dir))
        details["rows"] = len(rows)

    deltas = ms.augmentation_deltas(rows)
    out = Path(args.out)
    storage.write_evaluation_table(out / "evaluation.csv", rows)
    storage.write_delta_table(out / "evaluation_deltas.csv", deltas)
    summary = render_summary(rows, deltas)
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    _write_run_manifest(out / RUN_MANIFEST_NAME, args, {"split": manifest.config.seed})
    print(summary, end="")
    return 0


def build_parser() -> CliParser:
    parser = CliParser(prog="cli.py", description="sEMG gesture classification pipeline")
    parser.add_argument("--log-level", default=None, help="Console log level (overrides LOG_LEVEL)")
    parser.add_argument("--log-dir", default=None, help="Log directory (overrides LOG_DIR)")
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="Generate a synthetic recording corpus")
    synth.add_argument("--subjects", type=positive_int, default=4)
    synth.add_argument("--reps", type=positive_int, default=20)
    synth.add_argument("--seed", type=non_negative_int, default=42)
    synth.add_argument("--out", type=Path, default=Path("data"))
    synth.set_defaults(func=cmd_synth)

    extract = sub.add_parser("extract", help="Extract feature vectors from a dataset directory")
    extract.add_argument("--data", type=Path, default=Path("data"))
    extract.add_argument("--manifest", default=signal_model.MANIFEST_NAME)
    extract.add_argument("--ar-order", type=positive_int, default=4)
    extract.add_argument("--workers", type=positive_int, default=1)
    extract.add_argument("--out", type=Path, default=Path("features.csv"))
    extract.set_defaults(func=cmd_extract)

    augment = sub.add_parser("augment", help="Append LSTM-generated synthetic subjects")
    augment.add_argument("--features", type=Path, default=Path("features.csv"))
    augment.add_argument("--levels", type=_bounded_int(2), default=20)
    augment.add_argument("--synthetic-subjects", type=non_negative_int, default=2)
    augment.add_argument("--length", type=positive_int, default=20)
    augment.add_argument("--seed", type=non_negative_int, default=0)
    augment.add_argument("--hidden-dim", type=positive_int, default=32)
    augment.add_argument("--epochs", type=positive_int, default=200)
    augment.add_argument("--lstm-learning-rate", type=positive_float, default=0.05)
    augment.add_argument("--sampling", choices=["sample", "argmax"], default="sample")
    augment.add_argument("--workers", type=positive_int, default=1)
    augment.add_argument("--out", type=Path, default=Path("augmented.csv"))
    augment.set_defaults(func=cmd_augment)

    train = sub.add_parser("train", help="Train master-slave and conventional networks per subject")
    train.add_argument("--features", type=Path, default=Path("augmented.csv"))
    train.add_argument("--arch", choices=sorted(ARCH_CHOICES), default="both")
    train.add_argument("--iterations", type=positive_int, default=150)
    train.add_argument("--learning-rate", type=positive_float, default=0.3)
    train.add_argument("--lambda", dest="l2_lambda", type=non_negative_float, default=0.0)
    train.add_argument("--tolerance", type=positive_float, default=None)
    train.add_argument("--seed", type=non_negative_int, default=0)
    train.add_argument("--test-fraction", type=positive_float, default=0.3)
    train.add_argument("--split-seed", type=non_negative_int, default=0)
    train.add_argument("--subjects", type=non_negative_int, nargs="+", default=None)
    train.add_argument("--workers", type=positive_int, default=1)
    train.add_argument("--out", type=Path, default=Path("models"))
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser("eval", help="Evaluate trained models and write the accuracy table")
    evaluate.add_argument("--features", type=Path, default=Path("augmented.csv"))
    evaluate.add_argument("--models", type=Path, default=Path("models"))
    evaluate.add_argument("--out", type=Path, default=Path("results"))
    evaluate.set_defaults(func=cmd_eval)
    return parser


def _fail(ctx: RunContext, body: Dict[str, Any], exit_code: int) -> int:
    error_logger.error("Command failed", extra={"run_id": ctx.run_id, "command": ctx.command, **body})
    print(json.dumps(body), file=sys.stderr)
    return exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, configure logging and run one subcommand.

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    run_logger = setup_logging(level=args.log_level, log_dir=args.log_dir)
    ctx = RunContext(args.command, run_logger)
    logger.info("Command started", extra={"run_id": ctx.run_id, "command": args.command})
    try:
        code = args.func(args, ctx)
    except PipelineError as e:
        return _fail(ctx, e.to_detail(), e.exit_code)
    except ValidationError as e:
        return _fail(ctx, {"type": "VALIDATION_ERROR", "details": str(e.errors()[0]["msg"])}, 1)
    except OSError as e:
        return _fail(ctx, {"type": "IO_ERROR", "details": str(e)}, 2)
    except Exception as e:
        logger.exception("Unexpected error", extra={"run_id": ctx.run_id})
        return _fail(ctx, {"type": "INTERNAL_ERROR", "details": f"{type(e).__name__}: {e}"}, 2)
    logger.info("Command finished", extra={"run_id": ctx.run_id, "command": args.command})
    return code


if __name__ == "__main__":
    sys.exit(main())
