#!/usr/bin/env python3
"""
GF Fuzzy Classifier - Main Entry Point

Gradient-optimized zero-order TSK fuzzy classifier with a five-dataset
cross-validation benchmark.

Usage:
    python main.py fetch --dataset all
    python main.py train --dataset wine --seed 42 --out wine_model.json
    python main.py benchmark --dataset all [--workers 5] [--baseline]
    python main.py explain --model wine_model.json [--input 13.2,1.78,...] [--k 5]
    python main.py gradcheck [--seed 42] [--h 1e-5]

Exit codes:
    0  success (benchmark: every acceptance band met)
    1  usage or configuration error
    2  data, model file or numeric error
    3  benchmark acceptance band failed
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent))

from config import config
from models.fuzzy_classifier import init_classifier
from models.serialization import load_classifier, load_input_scaling, save_classifier
from services.benchmark import GFConfig, emit_report, run_benchmark
from services.dataset_loader import (
    MinMaxScaler,
    dump_normalized_csv,
    fetch_dataset,
    load_csv,
    minmax_apply,
    minmax_fit,
    resolve_spec,
    select_specs,
)
from services.explainer import SOFTMAX_NOTE, export_rules, format_trace, trace, trace_to_dict
from services.gradcheck import run_gradcheck
from services.trainer import TrainConfig, train, write_loss_curve
from utils.errors import (
    ConfigurationError,
    DataError,
    FuzzyClassifierError,
    IncompleteRunError,
    ModelIntegrityError,
    NumericError,
)
from utils.log import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BAND_FAILED = 3


class UsageErrorParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with EXIT_USAGE instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ------------------------------
# Subcommands
# ------------------------------

def cmd_fetch(args) -> int:
    specs = select_specs(args.dataset)
    if not specs:
        raise ConfigurationError("No dataset selected")
    for spec in specs:
        result = fetch_dataset(spec, args.data_dir)
        status = "downloaded" if result.downloaded else "already present"
        print(f"[{spec.key}] {status}: {result.path} ({result.rows} rows verified)")
    return EXIT_OK


def cmd_train(args) -> int:
    spec = resolve_spec(args.dataset)
    gf_config = GFConfig.for_spec(spec, args.mfs, args.rules, args.epochs, args.lr, args.seed)
    train_config = TrainConfig(
        max_epochs=gf_config.max_epochs,
        lr=gf_config.lr,
        seed=gf_config.seed,
        log_every=config.LOG_EVERY,
    )
    out_path = Path(args.out) if args.out else config.REPORT_DIR / f"{spec.key}_model.json"

    dataset = load_csv(spec, args.data_dir)
    scaler = minmax_fit(dataset.X)
    X = minmax_apply(scaler, dataset.X)
    if args.dump_normalized:
        dump_path = dump_normalized_csv(dataset, scaler, Path(args.dump_normalized))
        print(f"Normalized data saved to {dump_path}")

    model = init_classifier(
        num_inputs=dataset.num_features,
        num_classes=dataset.num_classes,
        mfs_per_input=gf_config.mfs_per_input,
        num_rules=gf_config.num_rules,
        seed=gf_config.seed,
        feature_names=dataset.feature_names,
        class_names=dataset.class_names,
    )
    print(f"Training GF on {spec.display_name}: {dataset.num_rows} rows, "
          f"M={gf_config.mfs_per_input}, R={gf_config.num_rules}, {gf_config.max_epochs} epochs")
    trained, record = train(model, X, dataset.y, train_config)

    save_classifier(trained, out_path, input_scaling=(scaler.feature_min, scaler.feature_max))
    print(f"Final loss: {record.final_loss:.6f}")
    print(f"Training accuracy: {record.final_train_accuracy:.4f}")
    print(f"Training time: {record.wall_clock_seconds:.3f}s")
    print(f"Model saved to {out_path}")
    if args.loss_curve:
        curve_path = write_loss_curve(record, Path(args.loss_curve))
        print(f"Loss curve saved to {curve_path}")
    return EXIT_OK


def _print_verdicts(reports) -> List[str]:
    failed = []
    for report in reports:
        band = report.comparison.band if report.comparison else None
        verdict = "PASS" if report.passed else "FAIL"
        band_text = f" (band >= {band:.1f}%)" if band is not None else ""
        print(f"{report.display_name}: mean accuracy {report.summary.mean:.3f}%{band_text} {verdict}")
        baseline = report.baseline_summary
        if baseline is not None:
            print(f"{report.display_name}: softmax regression mean accuracy {baseline.mean:.3f}%")
        if not report.passed:
            failed.append(report.dataset)
    return failed


def cmd_benchmark(args) -> int:
    try:
        reports = run_benchmark(
            selector=args.dataset,
            data_dir=args.data_dir,
            mfs_per_input=args.mfs,
            num_rules=args.rules,
            max_epochs=args.epochs,
            lr=args.lr,
            seed=args.seed,
            workers=args.workers,
            baseline=args.baseline,
        )
    except IncompleteRunError as e:
        if e.results:
            for path in emit_report(e.results, args.report_dir):
                print(f"Wrote {path}")
            _print_verdicts(e.results)
        for key, message in e.failures.items():
            print(f"[{key}] failed: {message}", file=sys.stderr)
        raise

    for path in emit_report(reports, args.report_dir):
        print(f"Wrote {path}")
    failed = _print_verdicts(reports)
    if failed:
        print(f"Acceptance band not met for: {', '.join(failed)}")
        return EXIT_BAND_FAILED
    return EXIT_OK


def _parse_row(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        raise ConfigurationError(f"--input must be comma-separated numbers, got {text!r}") from None


def cmd_explain(args) -> int:
    if args.k < 1:
        raise ConfigurationError(f"--k must be >= 1, got {args.k}")
    row = _parse_row(args.input) if args.input is not None else None
    model_path = Path(args.model)
    if not model_path.is_file():
        raise DataError(f"Model file {model_path} not found")
    model = load_classifier(model_path)

    if row is None:
        print(SOFTMAX_NOTE)
        sys.stdout.write(export_rules(model))
        return EXIT_OK

    if len(row) != model.num_inputs:
        raise ConfigurationError(f"--input has {len(row)} values, model expects {model.num_inputs}")
    scaling = load_input_scaling(model_path)
    if scaling is not None:
        row = minmax_apply(MinMaxScaler(*scaling), [row])[0]
    prediction_trace = trace(model, row, k=args.k)
    if args.json:
        print(json.dumps(trace_to_dict(prediction_trace), indent=2))
    else:
        sys.stdout.write(format_trace(prediction_trace))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    reports = run_gradcheck(
        seed=args.seed,
        num_inputs=args.inputs,
        mfs_per_input=args.mfs,
        num_rules=args.rules,
        num_classes=args.classes,
        batch=args.batch,
        h=args.h,
        trials=args.trials,
    )
    worst = max(reports, key=lambda report: report.max_relative_error)
    print(f"Max relative error: {worst.max_relative_error:.3e} (at {worst.worst_parameter}, h={args.h:g}, "
          f"{len(reports)} trial(s))")
    if worst.passed(config.GRADCHECK_TOLERANCE):
        print(f"PASS (tolerance {config.GRADCHECK_TOLERANCE:g})")
        return EXIT_OK
    print(f"FAIL (tolerance {config.GRADCHECK_TOLERANCE:g})")
    return EXIT_DATA


# ------------------------------
# Argument parsing
# ------------------------------

def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {value}")
    return value


def _add_hyperparameters(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mfs", type=_positive_int, default=None,
                        help="MFs per input (default: per-dataset value)")
    parser.add_argument("--rules", type=_positive_int, default=None,
                        help="Number of rules (default: per-dataset value)")
    parser.add_argument("--epochs", type=_positive_int, default=None,
                        help=f"Training epochs (default: {config.MAX_EPOCHS})")
    parser.add_argument("--lr", type=float, default=None,
                        help="ADAM learning rate (default: per-dataset value)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data-dir", type=Path, default=None,
                        help=f"Directory holding raw dataset files (default: {config.DATA_DIR}, env GF_DATA_DIR)")
    common.add_argument("--seed", type=int, default=config.SEED,
                        help=f"Random seed (default: {config.SEED})")
    common.add_argument("--log-level", type=str, default=config.LOG_LEVEL,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help=f"Logging level (default: {config.LOG_LEVEL})")

    parser = UsageErrorParser(
        description="Gradient-optimized fuzzy classifier: train, benchmark, explain"
    )
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=UsageErrorParser)

    fetch = subparsers.add_parser("fetch", parents=[common], help="Download the UCI benchmark datasets")
    fetch.add_argument("--dataset", type=str, default="all",
                       help="Dataset name, comma-separated list or 'all' (default: all)")
    fetch.set_defaults(handler=cmd_fetch)

    train_parser = subparsers.add_parser("train", parents=[common], help="Train on a full dataset and save the model")
    train_parser.add_argument("--dataset", type=str, required=True, help="Dataset name")
    train_parser.add_argument("--out", type=str, default=None,
                              help="Model file (default: <report dir>/<dataset>_model.json)")
    train_parser.add_argument("--loss-curve", type=str, default=None,
                              help="Also write the per-epoch loss as epoch,loss lines")
    train_parser.add_argument("--dump-normalized", type=str, default=None,
                              help="Also write the Min-Max scaled rows as CSV (feature columns plus label)")
    _add_hyperparameters(train_parser)
    train_parser.set_defaults(handler=cmd_train)

    benchmark = subparsers.add_parser("benchmark", parents=[common], help="5-fold cross-validation benchmark")
    benchmark.add_argument("--dataset", type=str, default="all",
                           help="Dataset name, comma-separated list or 'all' (default: all)")
    benchmark.add_argument("--report-dir", type=Path, default=None,
                           help=f"Report directory (default: {config.REPORT_DIR}, env GF_REPORT_DIR)")
    benchmark.add_argument("--workers", type=_positive_int, default=1,
                           help="Folds trained in parallel (default: 1)")
    benchmark.add_argument("--baseline", action="store_true",
                           help="Also train a softmax regression on every fold and report it")
    _add_hyperparameters(benchmark)
    benchmark.set_defaults(handler=cmd_benchmark)

    explain = subparsers.add_parser("explain", parents=[common], help="Export rules or trace one prediction")
    explain.add_argument("--model", type=str, required=True, help="Model file written by train")
    explain.add_argument("--input", type=str, default=None,
                         help="Comma-separated feature row (raw units if the model stores its scaling)")
    explain.add_argument("--k", type=int, default=config.EXPLAIN_TOP_K,
                         help=f"Rules shown in a trace (default: {config.EXPLAIN_TOP_K})")
    explain.add_argument("--json", action="store_true", help="Print the trace as JSON")
    explain.set_defaults(handler=cmd_explain)

    gradcheck = subparsers.add_parser("gradcheck", parents=[common],
                                      help="Compare analytic gradients with finite differences")
    gradcheck.add_argument("--h", type=float, default=config.GRADCHECK_H,
                           help=f"Central-difference step (default: {config.GRADCHECK_H:g})")
    gradcheck.add_argument("--inputs", type=_positive_int, default=3, help="Inputs D (default: 3)")
    gradcheck.add_argument("--mfs", type=_positive_int, default=3, help="MFs per input M (default: 3)")
    gradcheck.add_argument("--rules", type=_positive_int, default=5, help="Rules R (default: 5)")
    gradcheck.add_argument("--classes", type=_positive_int, default=3, help="Classes C (default: 3)")
    gradcheck.add_argument("--batch", type=_positive_int, default=8, help="Rows N (default: 8)")
    gradcheck.add_argument("--trials", type=_positive_int, default=1,
                           help="Random instances, seeded seed, seed+1, ... (default: 1)")
    gradcheck.set_defaults(handler=cmd_gradcheck)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, dispatch, and map errors to exit codes."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        return args.handler(args)
    except ConfigurationError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ModelIntegrityError, NumericError) as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_DATA
    except FuzzyClassifierError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        print("\nInterrupted", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
