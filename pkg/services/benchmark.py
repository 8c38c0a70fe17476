"""
Benchmark Service: 5-fold GF evaluation and comparison with published results

Per dataset:
    1. Stratified 5-fold plan (seeded)
    2. Per fold: Min-Max fit on training rows, fresh GF, full-batch ADAM, validation accuracy
    3. Min / mean / max accuracy (percent) and mean training time
    4. Signed deltas against the published reference table and an acceptance band verdict
"""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from config import config
from models.fuzzy_classifier import init_classifier, predict_batch
from utils.errors import ConfigurationError, DataError, IncompleteRunError, NumericError

from .dataset_loader import (
    Dataset,
    DatasetSpec,
    Fold,
    load_csv,
    minmax_apply,
    minmax_fit,
    resolve_spec,
    select_specs,
    stratified_kfold,
)
from .trainer import TrainConfig, TrainRecord, train, train_baseline_softmax_regression

logger = logging.getLogger(__name__)


class ReferenceStats(NamedTuple):
    """Min / mean / max accuracy in percent."""
    min: float
    mean: float
    max: float


GF_MODEL = "GF"
REFERENCE_MODELS = (
    GF_MODEL,
    "Xgboost Classification",
    "Support Vector Classification",
    "Random Forest Classification",
    "Neural Network Classification",
    "Logistic Regression",
)
# Published row the measured softmax regression baseline is compared with
BASELINE_REFERENCE = "Logistic Regression"

# Published 5-fold accuracies (percent), three decimals as printed.
REFERENCE_TABLE: Dict[str, Dict[str, ReferenceStats]] = {
    "german": dict(zip(REFERENCE_MODELS, (
        ReferenceStats(78.125, 80.625, 83.125),
        ReferenceStats(69.200, 74.800, 80.000),
        ReferenceStats(64.800, 70.400, 76.000),
        ReferenceStats(72.800, 78.000, 83.200),
        ReferenceStats(58.400, 64.400, 70.400),
        ReferenceStats(70.000, 75.600, 80.800),
    ))),
    "breast_cancer": dict(zip(REFERENCE_MODELS, (
        ReferenceStats(96.703, 98.901, 100.000),
        ReferenceStats(94.406, 97.203, 99.301),
        ReferenceStats(90.210, 94.406, 97.902),
        ReferenceStats(95.105, 97.902, 100.000),
        ReferenceStats(87.413, 92.308, 96.503),
        ReferenceStats(92.308, 95.804, 98.601),
    ))),
    "car": dict(zip(REFERENCE_MODELS, (
        ReferenceStats(94.565, 95.296, 96.029),
        ReferenceStats(97.685, 98.843, 99.769),
        ReferenceStats(94.444, 96.296, 97.917),
        ReferenceStats(90.278, 92.824, 95.139),
        ReferenceStats(96.991, 98.380, 99.306),
        ReferenceStats(87.500, 90.278, 93.056),
    ))),
    "heart": dict(zip(REFERENCE_MODELS, (
        ReferenceStats(83.673, 87.619, 89.583),
        ReferenceStats(72.368, 81.579, 89.474),
        ReferenceStats(55.263, 65.789, 76.316),
        ReferenceStats(71.053, 80.263, 88.158),
        ReferenceStats(69.737, 78.947, 88.158),
        ReferenceStats(72.368, 81.579, 89.474),
    ))),
    "wine": dict(zip(REFERENCE_MODELS, (
        ReferenceStats(100.000, 100.000, 100.000),
        ReferenceStats(93.333, 97.778, 100.000),
        ReferenceStats(68.889, 80.000, 91.111),
        ReferenceStats(100.000, 100.000, 100.000),
        ReferenceStats(93.333, 97.778, 100.000),
        ReferenceStats(86.667, 93.333, 100.000),
    ))),
}

# Minimum measured GF mean accuracy (percent) per dataset.
ACCEPTANCE_BANDS: Dict[str, float] = {
    "wine": 97.0,
    "breast_cancer": 94.0,
    "heart": 78.0,
    "german": 72.0,
    "car": 88.0,
}


@dataclass(frozen=True)
class GFConfig:
    """GF hyperparameters of one benchmark run."""
    mfs_per_input: int
    num_rules: int
    max_epochs: int = config.MAX_EPOCHS
    lr: float = config.LEARNING_RATE
    seed: int = config.SEED

    def __post_init__(self):
        if self.mfs_per_input < 1 or self.num_rules < 1:
            raise ConfigurationError("mfs_per_input and num_rules must be >= 1")
        # TrainConfig validates epochs / lr / seed
        self.train_config()

    def train_config(self) -> TrainConfig:
        return TrainConfig(max_epochs=self.max_epochs, lr=self.lr, seed=self.seed, log_every=0)

    @classmethod
    def for_spec(
        cls,
        spec: DatasetSpec,
        mfs_per_input: Optional[int] = None,
        num_rules: Optional[int] = None,
        max_epochs: Optional[int] = None,
        lr: Optional[float] = None,
        seed: Optional[int] = None,
    ) -> "GFConfig":
        """Dataset defaults with any non-None override applied."""
        return cls(
            mfs_per_input=spec.mfs_per_input if mfs_per_input is None else mfs_per_input,
            num_rules=spec.num_rules if num_rules is None else num_rules,
            max_epochs=config.MAX_EPOCHS if max_epochs is None else max_epochs,
            lr=spec.learning_rate if lr is None else lr,
            seed=config.SEED if seed is None else seed,
        )


@dataclass(frozen=True)
class FoldResult:
    fold_index: int
    accuracy: float
    correct: int
    total: int
    train_seconds: float
    epochs: int
    final_loss: float


@dataclass(frozen=True)
class ReferenceComparison:
    """
    Measured GF statistics minus each published row, in percentage points.

    Attributes:
        deltas: model name -> (min, mean, max) deltas
        band: Minimum acceptable measured mean (None if the dataset has no band)
        passed: Whether the measured mean reaches the band
    """
    dataset: str
    deltas: Dict[str, ReferenceStats]
    band: Optional[float]
    passed: bool


@dataclass
class BenchmarkReport:
    dataset: str
    display_name: str
    gf_config: GFConfig
    folds: List[FoldResult]
    summary: ReferenceStats
    mean_train_seconds: float
    published_train_seconds: Optional[float]
    reference: Dict[str, ReferenceStats]
    comparison: Optional[ReferenceComparison] = None
    baseline_folds: Optional[List[FoldResult]] = None

    @property
    def passed(self) -> bool:
        return self.comparison is None or self.comparison.passed

    @property
    def baseline_summary(self) -> Optional[ReferenceStats]:
        return summarize(self.baseline_folds) if self.baseline_folds else None

    @property
    def baseline_delta(self) -> Optional[ReferenceStats]:
        """Measured softmax regression minus the published Logistic Regression row."""
        measured = self.baseline_summary
        published = self.reference.get(BASELINE_REFERENCE)
        if measured is None or published is None:
            return None
        return ReferenceStats(measured.min - published.min, measured.mean - published.mean, measured.max - published.max)


def summarize(folds: Sequence[FoldResult]) -> ReferenceStats:
    """Min / mean / max of fold accuracies, in percent."""
    if not folds:
        raise DataError("No fold results to summarize")
    accuracies = np.array([fold.accuracy for fold in folds], dtype=np.float64) * 100.0
    return ReferenceStats(float(accuracies.min()), float(accuracies.mean()), float(accuracies.max()))


def _split(dataset: Dataset, fold: Fold) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Fold rows scaled with a Min-Max scaler fit on the training rows only."""
    scaler = minmax_fit(dataset.X[fold.train_indices])
    X_train = minmax_apply(scaler, dataset.X[fold.train_indices])
    X_valid = minmax_apply(scaler, dataset.X[fold.validation_indices])
    y_valid = dataset.y[fold.validation_indices]
    if y_valid.shape[0] == 0:
        raise DataError(f"Fold {fold.index} has no validation rows")
    return X_train, dataset.y[fold.train_indices], X_valid, y_valid


def _fold_result(fold: Fold, predictions: np.ndarray, y_valid: np.ndarray, record: TrainRecord) -> FoldResult:
    correct = int(np.sum(predictions == y_valid))
    total = int(y_valid.shape[0])
    return FoldResult(
        fold_index=fold.index,
        accuracy=correct / total,
        correct=correct,
        total=total,
        train_seconds=record.wall_clock_seconds,
        epochs=record.epochs_run,
        final_loss=record.final_loss,
    )


def run_fold(dataset: Dataset, fold: Fold, gf_config: GFConfig) -> FoldResult:
    """
    Train a fresh GF on the fold's training rows and score its validation rows.

    The scaler is fit on training rows only; the model seed is gf_config.seed + fold index.
    """
    X_train, y_train, X_valid, y_valid = _split(dataset, fold)
    model = init_classifier(
        num_inputs=dataset.num_features,
        num_classes=dataset.num_classes,
        mfs_per_input=gf_config.mfs_per_input,
        num_rules=gf_config.num_rules,
        seed=gf_config.seed + fold.index,
        feature_names=dataset.feature_names,
        class_names=dataset.class_names,
    )
    trained, record = train(model, X_train, y_train, gf_config.train_config())
    result = _fold_result(fold, predict_batch(trained, X_valid), y_valid, record)
    logger.info(
        f"{dataset.name} fold {fold.index}: {result.correct}/{result.total} = {result.accuracy:.4f} "
        f"({result.train_seconds:.2f}s)"
    )
    return result


def run_baseline_fold(dataset: Dataset, fold: Fold, gf_config: GFConfig) -> FoldResult:
    """Softmax regression on the same split, scaling, epochs and learning rate as the GF fold."""
    X_train, y_train, X_valid, y_valid = _split(dataset, fold)
    trained, record = train_baseline_softmax_regression(
        X_train, y_train, gf_config.train_config(), num_classes=dataset.num_classes
    )
    result = _fold_result(fold, trained.predict(X_valid), y_valid, record)
    logger.info(f"{dataset.name} fold {fold.index} baseline: {result.correct}/{result.total}")
    return result


def compare_reference(
    report: BenchmarkReport,
    table: Dict[str, Dict[str, ReferenceStats]] = REFERENCE_TABLE,
    bands: Dict[str, float] = ACCEPTANCE_BANDS,
) -> ReferenceComparison:
    """Signed (measured - published) deltas per model and the band verdict."""
    if report.dataset not in table:
        raise ConfigurationError(f"No reference results for dataset {report.dataset!r}")
    measured = report.summary
    deltas = {
        model: ReferenceStats(measured.min - row.min, measured.mean - row.mean, measured.max - row.max)
        for model, row in table[report.dataset].items()
    }
    band = bands.get(report.dataset)
    passed = band is None or measured.mean >= band
    return ReferenceComparison(dataset=report.dataset, deltas=deltas, band=band, passed=passed)


def _check_data_present(spec: DatasetSpec, data_dir: Optional[Path]) -> None:
    path = spec.path(data_dir)
    if not path.is_file():
        raise DataError(
            f"{spec.display_name}: {path} not found. Download it with "
            f"`python main.py fetch --dataset {spec.key}`"
        )


def _map_folds(fn, dataset: Dataset, plan, gf_config: GFConfig, workers: int) -> List[FoldResult]:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda fold: fn(dataset, fold, gf_config), plan.folds))
    else:
        results = [fn(dataset, fold, gf_config) for fold in plan.folds]
    return sorted(results, key=lambda result: result.fold_index)


def run_dataset(
    spec: DatasetSpec,
    gf_config: GFConfig,
    data_dir: Optional[Path] = None,
    workers: int = 1,
    num_folds: int = config.NUM_FOLDS,
    baseline: bool = False,
) -> BenchmarkReport:
    """
    All folds of one dataset, aggregated and compared with the reference table.

    With `baseline`, a softmax regression is also trained on every fold.
    """
    _check_data_present(spec, data_dir)
    dataset = load_csv(spec, data_dir)
    plan = stratified_kfold(dataset.y, k=num_folds, seed=gf_config.seed)
    logger.info(
        f"{spec.display_name}: {dataset.num_rows} rows, {dataset.num_features} features, "
        f"M={gf_config.mfs_per_input}, R={gf_config.num_rules}, lr={gf_config.lr}, {plan.k} folds"
    )

    results = _map_folds(run_fold, dataset, plan, gf_config, workers)
    baseline_results = _map_folds(run_baseline_fold, dataset, plan, gf_config, workers) if baseline else None

    report = BenchmarkReport(
        dataset=spec.key,
        display_name=spec.display_name,
        gf_config=gf_config,
        folds=results,
        summary=summarize(results),
        mean_train_seconds=float(np.mean([result.train_seconds for result in results])),
        published_train_seconds=spec.published_train_seconds,
        reference=dict(REFERENCE_TABLE.get(spec.key, {})),
        baseline_folds=baseline_results,
    )
    if spec.key in REFERENCE_TABLE:
        report = replace(report, comparison=compare_reference(report))
    return report


def run_benchmark(
    selector: Union[str, Sequence[str]] = "all",
    data_dir: Optional[Path] = None,
    mfs_per_input: Optional[int] = None,
    num_rules: Optional[int] = None,
    max_epochs: Optional[int] = None,
    lr: Optional[float] = None,
    seed: Optional[int] = None,
    workers: int = 1,
    baseline: bool = False,
) -> List[BenchmarkReport]:
    """
    Benchmark one, several or all built-in datasets.

    Overrides and data files are validated for every selected dataset before
    any training starts. A dataset that fails while loading or training does
    not stop the others.

    Raises:
        ConfigurationError: unknown dataset or invalid override
        DataError: a data file is missing (the message names the fetch command)
        IncompleteRunError: some datasets failed; `.results` holds the finished reports
    """
    if isinstance(selector, str):
        specs = select_specs(selector)
    else:
        specs = [resolve_spec(name) for name in selector]
    if not specs:
        raise ConfigurationError("No dataset selected")
    if workers < 1:
        raise ConfigurationError(f"workers must be >= 1, got {workers}")

    configs = [GFConfig.for_spec(spec, mfs_per_input, num_rules, max_epochs, lr, seed) for spec in specs]
    for spec in specs:
        _check_data_present(spec, data_dir)

    reports = []
    failures = {}
    for spec, gf_config in zip(specs, configs):
        try:
            reports.append(run_dataset(spec, gf_config, data_dir, workers, baseline=baseline))
        except (DataError, NumericError) as e:
            logger.error(f"{spec.display_name}: {e}")
            failures[spec.key] = str(e)
    if failures:
        raise IncompleteRunError(
            f"Benchmark failed for {', '.join(failures)}",
            results=reports,
            failures=failures,
        )
    return reports


# ------------------------------
# Report files
# ------------------------------

def _fold_to_dict(fold: FoldResult) -> Dict[str, Any]:
    return {
        "fold_index": fold.fold_index,
        "accuracy": fold.accuracy,
        "correct": fold.correct,
        "total": fold.total,
        "epochs": fold.epochs,
        "final_loss": fold.final_loss,
    }


def report_to_dict(report: BenchmarkReport) -> Dict[str, Any]:
    """
    JSON-compatible report. Every wall-clock value sits under `timing`, so the
    rest of the document is reproducible bit for bit.
    """
    timing = {
        "fold_train_seconds": [fold.train_seconds for fold in report.folds],
        "mean_train_seconds": report.mean_train_seconds,
    }
    baseline = None
    if report.baseline_folds:
        delta = report.baseline_delta
        baseline = {
            "folds": [_fold_to_dict(fold) for fold in report.baseline_folds],
            "summary": report.baseline_summary._asdict(),
            "delta": None if delta is None else delta._asdict(),
        }
        timing["baseline_fold_train_seconds"] = [fold.train_seconds for fold in report.baseline_folds]
    return {
        "dataset": report.dataset,
        "display_name": report.display_name,
        "gf_config": asdict(report.gf_config),
        "folds": [_fold_to_dict(fold) for fold in report.folds],
        "summary": report.summary._asdict(),
        "reference": {model: stats._asdict() for model, stats in report.reference.items()},
        "comparison": None if report.comparison is None else {
            "deltas": {model: stats._asdict() for model, stats in report.comparison.deltas.items()},
            "band": report.comparison.band,
            "passed": report.comparison.passed,
        },
        "baseline": baseline,
        "published_train_seconds": report.published_train_seconds,
        "timing": timing,
    }


def _stats(values: Dict[str, float]) -> ReferenceStats:
    return ReferenceStats(values["min"], values["mean"], values["max"])


def _folds_from_dicts(folds: Sequence[Dict[str, Any]], seconds: Sequence[float]) -> List[FoldResult]:
    return [FoldResult(train_seconds=fold_seconds, **fold) for fold, fold_seconds in zip(folds, seconds)]


def report_from_dict(document: Dict[str, Any]) -> BenchmarkReport:
    """Inverse of report_to_dict()."""
    timing = document["timing"]
    comparison = document.get("comparison")
    baseline = document.get("baseline")
    return BenchmarkReport(
        dataset=document["dataset"],
        display_name=document["display_name"],
        gf_config=GFConfig(**document["gf_config"]),
        folds=_folds_from_dicts(document["folds"], timing["fold_train_seconds"]),
        summary=_stats(document["summary"]),
        mean_train_seconds=timing["mean_train_seconds"],
        published_train_seconds=document["published_train_seconds"],
        reference={model: _stats(stats) for model, stats in document["reference"].items()},
        comparison=None if comparison is None else ReferenceComparison(
            dataset=document["dataset"],
            deltas={model: _stats(stats) for model, stats in comparison["deltas"].items()},
            band=comparison["band"],
            passed=comparison["passed"],
        ),
        baseline_folds=None if baseline is None else _folds_from_dicts(
            baseline["folds"], timing["baseline_fold_train_seconds"]
        ),
    )


def _fmt(value: Optional[float], digits: int = 3) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def render_markdown(reports: Sequence[BenchmarkReport]) -> str:
    """Published table layout per dataset with the measured GF (and baseline, if run) rows appended."""
    lines = [
        "# GF benchmark",
        "",
        "| Dataset | Measured GF mean | Published GF mean | Delta | Band | Result | Mean train s | Published train s |",
        "|---|---:|---:|---:|---:|---|---:|---:|",
    ]
    for report in reports:
        published = report.reference.get(GF_MODEL)
        comparison = report.comparison
        delta = comparison.deltas[GF_MODEL].mean if comparison and GF_MODEL in comparison.deltas else None
        band = comparison.band if comparison else None
        verdict = "pass" if report.passed else "FAIL"
        lines.append(
            f"| {report.display_name} | {_fmt(report.summary.mean)} | "
            f"{_fmt(published.mean if published else None)} | {_fmt(delta)} | {_fmt(band, 1)} | {verdict} | "
            f"{_fmt(report.mean_train_seconds)} | {_fmt(report.published_train_seconds)} |"
        )

    for report in reports:
        cfg = report.gf_config
        lines += [
            "",
            f"## {report.display_name}",
            "",
            "| Model | Min | Mean | Max |",
            "|---|---:|---:|---:|",
        ]
        for model, stats in report.reference.items():
            lines.append(f"| {model} | {_fmt(stats.min)} | {_fmt(stats.mean)} | {_fmt(stats.max)} |")
        lines.append(
            f"| GF (measured) | {_fmt(report.summary.min)} | {_fmt(report.summary.mean)} | {_fmt(report.summary.max)} |"
        )
        baseline = report.baseline_summary
        if baseline is not None:
            lines.append(
                f"| Softmax regression (measured) | {_fmt(baseline.min)} | {_fmt(baseline.mean)} | {_fmt(baseline.max)} |"
            )
        lines += [
            "",
            f"M={cfg.mfs_per_input}, R={cfg.num_rules}, epochs={cfg.max_epochs}, lr={cfg.lr}, seed={cfg.seed}. "
            f"Mean train time {_fmt(report.mean_train_seconds)} s "
            f"(published: {_fmt(report.published_train_seconds)} s on GPU).",
        ]
    return "\n".join(lines) + "\n"


def emit_report(reports: Sequence[BenchmarkReport], report_dir: Optional[Path] = None) -> List[Path]:
    """
    Write `<dataset>_report.json` per report and one `benchmark.md`.

    Raises:
        DataError: the destination cannot be written
    """
    report_dir = Path(report_dir or config.REPORT_DIR)
    written = []
    try:
        report_dir.mkdir(parents=True, exist_ok=True)
        for report in reports:
            path = report_dir / f"{report.dataset}_report.json"
            path.write_text(json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n", encoding="utf-8")
            written.append(path)
        summary_path = report_dir / "benchmark.md"
        summary_path.write_text(render_markdown(reports), encoding="utf-8")
        written.append(summary_path)
    except OSError as e:
        raise DataError(f"Cannot write reports to {report_dir}: {e}") from e
    return written
