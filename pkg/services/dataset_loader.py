"""
Dataset Service: UCI dataset specs, CSV loading, Min-Max scaling, stratified folds

Built-in datasets:
    - german         Statlog (German Credit Data)          20 features, 1000 rows, 2 classes
    - breast_cancer  Breast Cancer Wisconsin (Diagnostic)   30 features,  569 rows, 2 classes
    - car            Car Evaluation                          6 features, 1728 rows, 4 classes
    - heart          Heart Disease (Cleveland)              13 features,  303 rows, 2 classes
    - wine           Wine                                   13 features,  178 rows, 3 classes

Preprocessing: categorical values become integer codes, declared feature drops
are applied, the Heart Disease target is collapsed to presence/absence, and
Min-Max scaling is fit on training rows only.
"""
import logging
import os
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from config import config
from utils.errors import ConfigurationError, DataError, FetchError

logger = logging.getLogger(__name__)

NUMERIC = "numeric"
CATEGORICAL = "categorical"
ORDINAL = "ordinal"

MISSING_MARKERS = ("?", "")


@dataclass(frozen=True)
class ColumnSpec:
    """
    One raw feature column.

    Attributes:
        name: Feature name
        kind: numeric, categorical (lexicographic codes) or ordinal (declared order)
        levels: Ordered category values for ordinal columns
    """
    name: str
    kind: str = NUMERIC
    levels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL, ORDINAL):
            raise ConfigurationError(f"Unknown column kind {self.kind!r} for {self.name}")
        if self.kind == ORDINAL and not self.levels:
            raise ConfigurationError(f"Ordinal column {self.name} needs declared levels")


def _ordinal(name: str, *levels: str) -> ColumnSpec:
    return ColumnSpec(name, ORDINAL, tuple(levels))


def _numeric(*names: str) -> List[ColumnSpec]:
    return [ColumnSpec(name) for name in names]


@dataclass(frozen=True, eq=False)
class DatasetSpec:
    """
    Declarative description of a raw dataset file.

    Attributes:
        key: Short identifier (also the report file prefix)
        display_name: Name as printed in reports
        file_name: Raw file name inside the data directory
        url_path: Path below config.UCI_BASE_URL for fetch
        separator: Field separator (regex allowed, e.g. r"\\s+")
        raw_columns: Every column of the raw file, in file order
        features: Descriptors of the feature columns (before drops)
        target_column: Name of the label column
        target_mapping: Raw target value -> class index
        target_transform: Alternative to target_mapping for computed labels
        class_names: Class index -> name
        ignored_columns: Non-feature columns (IDs) that are never read as features
        columns_to_drop: Feature columns removed during preprocessing
        expected_rows / expected_features / expected_classes: Published shape
        mfs_per_input / num_rules / learning_rate: Default GF configuration for this dataset
        published_train_seconds: Published mean GF training time (GPU)
        has_header: Whether the first line holds column names
    """
    key: str
    display_name: str
    file_name: str
    raw_columns: Tuple[str, ...]
    features: Tuple[ColumnSpec, ...]
    target_column: str
    class_names: Tuple[str, ...]
    target_mapping: Optional[Dict[str, int]] = None
    target_transform: Optional[Callable[[str], int]] = None
    url_path: Optional[str] = None
    separator: str = ","
    ignored_columns: Tuple[str, ...] = ()
    columns_to_drop: Tuple[str, ...] = ()
    expected_rows: Optional[int] = None
    expected_features: Optional[int] = None
    expected_classes: Optional[int] = None
    mfs_per_input: int = 13
    num_rules: int = 300
    learning_rate: float = config.LEARNING_RATE
    published_train_seconds: Optional[float] = None
    has_header: bool = False

    def __post_init__(self):
        feature_names = [column.name for column in self.features]
        declared = set(feature_names) | {self.target_column} | set(self.ignored_columns)
        if declared != set(self.raw_columns) or len(self.raw_columns) != len(declared):
            raise ConfigurationError(f"{self.key}: raw columns do not match features + target + ignored columns")
        unknown_drops = set(self.columns_to_drop) - set(feature_names)
        if unknown_drops:
            raise ConfigurationError(f"{self.key}: cannot drop unknown columns {sorted(unknown_drops)}")
        if (self.target_mapping is None) == (self.target_transform is None):
            raise ConfigurationError(f"{self.key}: give exactly one of target_mapping / target_transform")
        if self.expected_features is not None and self.expected_features != len(self.features):
            raise ConfigurationError(f"{self.key}: {len(self.features)} feature columns, expected {self.expected_features}")
        if self.expected_classes is not None and self.expected_classes != len(self.class_names):
            raise ConfigurationError(f"{self.key}: {len(self.class_names)} class names, expected {self.expected_classes}")

    @property
    def kept_features(self) -> Tuple[ColumnSpec, ...]:
        return tuple(column for column in self.features if column.name not in self.columns_to_drop)

    @property
    def url(self) -> Optional[str]:
        if self.url_path is None:
            return None
        return f"{config.UCI_BASE_URL.rstrip('/')}/{self.url_path}"

    def path(self, data_dir: Optional[Path] = None) -> Path:
        return Path(data_dir or config.DATA_DIR) / self.file_name


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Encoded dataset.

    Attributes:
        X: Feature matrix [N, D] (float64, unscaled)
        y: Class indices [N]
        feature_names: Name per column of X
        class_names: Name per class index
        name: Spec key it was loaded from
    """
    X: np.ndarray
    y: np.ndarray
    feature_names: Tuple[str, ...]
    class_names: Tuple[str, ...]
    name: str = ""

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[1] != len(self.feature_names):
            raise DataError(f"Inconsistent dataset shapes: X {X.shape}, y {y.shape}, {len(self.feature_names)} names")
        if not np.all(np.isfinite(X)):
            raise DataError(f"{self.name}: feature matrix contains non-finite values")
        if y.size and (y.min() < 0 or y.max() >= len(self.class_names)):
            raise DataError(f"{self.name}: labels outside [0, {len(self.class_names)})")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @property
    def num_rows(self) -> int:
        return self.X.shape[0]

    @property
    def num_features(self) -> int:
        return self.X.shape[1]

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True, eq=False)
class MinMaxScaler:
    """Per-feature minimum and maximum learned from a training partition."""
    feature_min: np.ndarray
    feature_max: np.ndarray


@dataclass(frozen=True, eq=False)
class Fold:
    index: int
    train_indices: np.ndarray
    validation_indices: np.ndarray


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """k train/validation splits whose validation sets partition [0, N)."""
    k: int
    seed: int
    folds: Tuple[Fold, ...]


@dataclass
class FetchResult:
    key: str
    path: Path
    downloaded: bool
    rows: int


def heart_target_binarize(raw: int) -> int:
    """Heart Disease severity 0..4 -> absence (0) / presence (1)."""
    if isinstance(raw, bool) or raw not in (0, 1, 2, 3, 4):
        raise DataError(f"Heart Disease target must be an integer in 0..4, got {raw!r}")
    return 0 if raw == 0 else 1


def _heart_target(raw: str) -> int:
    try:
        value = float(raw)
    except ValueError as e:
        raise DataError(f"Heart Disease target {raw!r} is not a number") from e
    if not value.is_integer():
        raise DataError(f"Heart Disease target must be an integer in 0..4, got {raw!r}")
    return heart_target_binarize(int(value))


# ------------------------------
# Built-in specs
# ------------------------------

_GERMAN_FEATURES = (
    _ordinal("checking_status", "A11", "A12", "A13", "A14"),
    ColumnSpec("duration"),
    _ordinal("credit_history", "A30", "A31", "A32", "A33", "A34"),
    _ordinal("purpose", "A40", "A41", "A42", "A43", "A44", "A45", "A46", "A47", "A48", "A49", "A410"),
    ColumnSpec("credit_amount"),
    _ordinal("savings_status", "A61", "A62", "A63", "A64", "A65"),
    _ordinal("employment", "A71", "A72", "A73", "A74", "A75"),
    ColumnSpec("installment_rate"),
    _ordinal("personal_status", "A91", "A92", "A93", "A94", "A95"),
    _ordinal("other_debtors", "A101", "A102", "A103"),
    ColumnSpec("residence_since"),
    _ordinal("property", "A121", "A122", "A123", "A124"),
    ColumnSpec("age"),
    _ordinal("other_installment_plans", "A141", "A142", "A143"),
    _ordinal("housing", "A151", "A152", "A153"),
    ColumnSpec("existing_credits"),
    _ordinal("job", "A171", "A172", "A173", "A174"),
    ColumnSpec("num_dependents"),
    _ordinal("own_telephone", "A191", "A192"),
    _ordinal("foreign_worker", "A201", "A202"),
)

_WDBC_FEATURES = tuple(
    ColumnSpec(f"{measure}_{statistic}")
    for statistic in ("mean", "se", "worst")
    for measure in ("radius", "texture", "perimeter", "area", "smoothness", "compactness",
                    "concavity", "concave_points", "symmetry", "fractal_dimension")
)

_CAR_FEATURES = (
    _ordinal("buying", "low", "med", "high", "vhigh"),
    _ordinal("maint", "low", "med", "high", "vhigh"),
    _ordinal("doors", "2", "3", "4", "5more"),
    _ordinal("persons", "2", "4", "more"),
    _ordinal("lug_boot", "small", "med", "big"),
    _ordinal("safety", "low", "med", "high"),
)

_HEART_FEATURES = tuple(_numeric(
    "age", "sex", "cp", "trestbps", "chol", "fbs", "restecg",
    "thalach", "exang", "oldpeak", "slope", "ca", "thal",
))

_WINE_FEATURES = tuple(_numeric(
    "alcohol", "malic_acid", "ash", "alcalinity_of_ash", "magnesium", "total_phenols",
    "flavanoids", "nonflavanoid_phenols", "proanthocyanins", "color_intensity", "hue",
    "od280_od315", "proline",
))


def builtin_specs() -> Dict[str, DatasetSpec]:
    """The five benchmark datasets, keyed by spec key (in report order)."""
    specs = [
        DatasetSpec(
            key="german",
            display_name="Statlog (German Credit Data)",
            file_name="german.data",
            url_path="statlog/german/german.data",
            separator=r"\s+",
            raw_columns=tuple(c.name for c in _GERMAN_FEATURES) + ("class",),
            features=_GERMAN_FEATURES,
            target_column="class",
            target_mapping={"1": 0, "2": 1},
            class_names=("good", "bad"),
            expected_rows=1000,
            expected_features=20,
            expected_classes=2,
            mfs_per_input=6,
            num_rules=85,
            learning_rate=0.01,
            published_train_seconds=8.985,
        ),
        DatasetSpec(
            key="breast_cancer",
            display_name="Breast Cancer Wisconsin (Diagnostic)",
            file_name="wdbc.data",
            url_path="breast-cancer-wisconsin/wdbc.data",
            raw_columns=("id", "diagnosis") + tuple(c.name for c in _WDBC_FEATURES),
            features=_WDBC_FEATURES,
            target_column="diagnosis",
            target_mapping={"B": 0, "M": 1},
            class_names=("benign", "malignant"),
            ignored_columns=("id",),
            expected_rows=569,
            expected_features=30,
            expected_classes=2,
            mfs_per_input=13,
            num_rules=202,
            learning_rate=0.01,
            published_train_seconds=6.005,
        ),
        DatasetSpec(
            key="car",
            display_name="Car Evaluation",
            file_name="car.data",
            url_path="car/car.data",
            raw_columns=tuple(c.name for c in _CAR_FEATURES) + ("class",),
            features=_CAR_FEATURES,
            target_column="class",
            target_mapping={"unacc": 0, "acc": 1, "good": 2, "vgood": 3},
            class_names=("unacc", "acc", "good", "vgood"),
            expected_rows=1728,
            expected_features=6,
            expected_classes=4,
            mfs_per_input=27,
            num_rules=128,
            learning_rate=0.01,
            published_train_seconds=16.691,
        ),
        DatasetSpec(
            key="heart",
            display_name="Heart Disease (Cleveland)",
            file_name="processed.cleveland.data",
            url_path="heart-disease/processed.cleveland.data",
            raw_columns=tuple(c.name for c in _HEART_FEATURES) + ("num",),
            features=_HEART_FEATURES,
            target_column="num",
            target_transform=_heart_target,
            class_names=("absence", "presence"),
            columns_to_drop=("ca", "thal"),
            expected_rows=303,
            expected_features=13,
            expected_classes=2,
            mfs_per_input=13,
            num_rules=300,
            learning_rate=0.01,
            published_train_seconds=4.202,
        ),
        DatasetSpec(
            key="wine",
            display_name="Wine",
            file_name="wine.data",
            url_path="wine/wine.data",
            raw_columns=("class",) + tuple(c.name for c in _WINE_FEATURES),
            features=_WINE_FEATURES,
            target_column="class",
            target_mapping={"1": 0, "2": 1, "3": 2},
            class_names=("cultivar_1", "cultivar_2", "cultivar_3"),
            expected_rows=178,
            expected_features=13,
            expected_classes=3,
            mfs_per_input=13,
            num_rules=300,
            learning_rate=0.01,
            published_train_seconds=3.596,
        ),
    ]
    return {spec.key: spec for spec in specs}


_ALIASES = {
    "german_credit": "german",
    "statlog": "german",
    "breast": "breast_cancer",
    "wdbc": "breast_cancer",
    "car_evaluation": "car",
    "heart_disease": "heart",
    "cleveland": "heart",
}


def resolve_spec(name: str) -> DatasetSpec:
    """Built-in spec by key or alias (case-insensitive, '-' == '_')."""
    specs = builtin_specs()
    key = name.strip().lower().replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in specs:
        raise ConfigurationError(f"Unknown dataset {name!r}; choose from {', '.join(specs)} or 'all'")
    return specs[key]


def select_specs(selector: str) -> List[DatasetSpec]:
    """`all` or a comma-separated list of dataset names."""
    if selector.strip().lower() == "all":
        return list(builtin_specs().values())
    return [resolve_spec(part) for part in selector.split(",") if part.strip()]


# ------------------------------
# Loading
# ------------------------------

def _read_raw(spec: DatasetSpec, path: Path) -> pd.DataFrame:
    if not path.is_file():
        raise DataError(f"{spec.key}: data file {path} not found")
    try:
        frame = pd.read_csv(
            path,
            header=0 if spec.has_header else None,
            sep=spec.separator,
            dtype=str,
            keep_default_na=False,
            skipinitialspace=True,
        )
    except pd.errors.ParserError as e:
        raise DataError(f"{spec.key}: ragged rows in {path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise DataError(f"{spec.key}: {path} is empty") from e

    if frame.shape[1] != len(spec.raw_columns):
        raise DataError(f"{spec.key}: {path} has {frame.shape[1]} columns, expected {len(spec.raw_columns)}")
    if frame.isna().any().any():
        first_bad = int(np.flatnonzero(frame.isna().any(axis=1).to_numpy())[0])
        raise DataError(f"{spec.key}: ragged row {first_bad + 1} in {path}")
    frame.columns = list(spec.raw_columns)
    return frame.apply(lambda column: column.str.strip())


def _encode_column(spec: DatasetSpec, column: ColumnSpec, values: pd.Series) -> np.ndarray:
    missing = values.isin(MISSING_MARKERS)
    if missing.any():
        row = int(np.flatnonzero(missing.to_numpy())[0]) + 1
        raise DataError(
            f"{spec.key}: missing value in column {column.name!r} (row {row}); missing cells are not imputed"
        )
    if column.kind == NUMERIC:
        try:
            return pd.to_numeric(values, errors="raise").to_numpy(dtype=np.float64)
        except (ValueError, TypeError) as e:
            raise DataError(f"{spec.key}: non-numeric value in column {column.name!r}: {e}") from e

    levels = column.levels if column.kind == ORDINAL else tuple(sorted(values.unique()))
    codes = {level: code for code, level in enumerate(levels)}
    unknown = sorted(set(values.unique()) - set(codes))
    if unknown:
        raise DataError(f"{spec.key}: unknown category values {unknown} in column {column.name!r}")
    return values.map(codes).to_numpy(dtype=np.float64)


def _encode_target(spec: DatasetSpec, values: pd.Series) -> np.ndarray:
    if spec.target_mapping is not None:
        unknown = sorted(set(values.unique()) - set(spec.target_mapping))
        if unknown:
            raise DataError(f"{spec.key}: unknown target values {unknown}")
        return values.map(spec.target_mapping).to_numpy(dtype=np.int64)
    return np.array([spec.target_transform(value) for value in values], dtype=np.int64)


def load_csv(spec: DatasetSpec, data_dir: Optional[Path] = None, path: Optional[Path] = None) -> Dataset:
    """
    Load and encode a raw dataset file.

    Args:
        spec: Dataset description
        data_dir: Directory holding spec.file_name (default: config.DATA_DIR)
        path: Explicit file path (overrides data_dir)

    Raises:
        DataError: missing file, ragged rows, missing cells, unknown categories,
            row count different from spec.expected_rows
    """
    path = Path(path) if path is not None else spec.path(data_dir)
    frame = _read_raw(spec, path)
    if spec.expected_rows is not None and len(frame) != spec.expected_rows:
        raise DataError(f"{spec.key}: {path} has {len(frame)} rows, expected {spec.expected_rows}")

    kept = spec.kept_features
    X = np.column_stack([_encode_column(spec, column, frame[column.name]) for column in kept])
    y = _encode_target(spec, frame[spec.target_column])
    logger.debug(f"Loaded {spec.key}: {X.shape[0]} rows, {X.shape[1]} features")
    return Dataset(
        X=X,
        y=y,
        feature_names=tuple(column.name for column in kept),
        class_names=spec.class_names,
        name=spec.key,
    )


# ------------------------------
# Scaling
# ------------------------------

def minmax_fit(X_train) -> MinMaxScaler:
    """Learn per-feature min/max from training rows."""
    X_train = np.asarray(X_train, dtype=np.float64)
    if X_train.ndim != 2 or X_train.shape[0] == 0:
        raise DataError("Cannot fit a Min-Max scaler on an empty training set")
    return MinMaxScaler(feature_min=X_train.min(axis=0), feature_max=X_train.max(axis=0))


def minmax_apply(scaler: MinMaxScaler, X) -> np.ndarray:
    """
    x' = (x - min) / (max - min); constant features map to 0.

    Values outside the fitted range are not clamped.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != scaler.feature_min.shape[0]:
        raise DataError(f"Scaler fitted on {scaler.feature_min.shape[0]} features, got shape {X.shape}")
    span = scaler.feature_max - scaler.feature_min
    constant = span == 0
    scaled = (X - scaler.feature_min) / np.where(constant, 1.0, span)
    scaled[:, constant] = 0.0
    return scaled


def dump_normalized_csv(dataset: Dataset, scaler: MinMaxScaler, path: Path) -> Path:
    """Write the scaled features plus a `label` column as CSV with header."""
    path = Path(path)
    frame = pd.DataFrame(minmax_apply(scaler, dataset.X), columns=list(dataset.feature_names))
    frame["label"] = dataset.y
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
    except OSError as e:
        raise DataError(f"Cannot write {path}: {e}") from e
    return path


# ------------------------------
# Folds
# ------------------------------

def stratified_kfold(labels, k: int = config.NUM_FOLDS, seed: int = config.SEED) -> FoldPlan:
    """
    Stratified k-fold plan.

    Rows of each class are shuffled with a seeded generator; classes are then
    laid end to end (ascending label) and dealt round-robin to the folds, the
    deal continuing across class boundaries.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if k < 2:
        raise ConfigurationError(f"k must be >= 2, got {k}")
    if k > n:
        raise ConfigurationError(f"k = {k} exceeds the number of rows ({n})")

    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == cls)) for cls in np.unique(labels)])
    assignment = np.empty(n, dtype=np.int64)
    assignment[order] = np.arange(n) % k

    folds = []
    all_rows = np.arange(n)
    for index in range(k):
        in_fold = assignment == index
        folds.append(Fold(index=index, train_indices=all_rows[~in_fold], validation_indices=all_rows[in_fold]))
    return FoldPlan(k=k, seed=seed, folds=tuple(folds))


# ------------------------------
# Fetching
# ------------------------------

_fetch_locks: Dict[Path, threading.Lock] = {}
_fetch_locks_guard = threading.Lock()


def _lock_for(path: Path) -> threading.Lock:
    with _fetch_locks_guard:
        return _fetch_locks.setdefault(path.resolve(), threading.Lock())


def _download(url: str, destination: Path, timeout: float) -> None:
    try:
        with urllib.request.urlopen(url, timeout=timeout) as response:
            destination.write_bytes(response.read())
    except (urllib.error.URLError, TimeoutError, OSError) as e:
        raise FetchError(f"Download of {url} failed: {e}") from e


def fetch_dataset(
    spec: DatasetSpec,
    destination: Optional[Path] = None,
    downloader: Callable[[str, Path, float], None] = _download,
) -> FetchResult:
    """
    Download the raw UCI file for `spec` unless it is already present.

    The file is verified by parsing it (row count included) before it is
    moved into place.

    Raises:
        FetchError: network failure or a downloaded file that fails verification
        DataError: an existing file fails verification
    """
    if spec.url is None:
        raise ConfigurationError(f"{spec.key}: no download location declared")
    destination = Path(destination or config.DATA_DIR)
    path = spec.path(destination)

    with _lock_for(path):
        if path.is_file():
            dataset = load_csv(spec, path=path)
            logger.info(f"{spec.key}: already present at {path}")
            return FetchResult(key=spec.key, path=path, downloaded=False, rows=dataset.num_rows)

        destination.mkdir(parents=True, exist_ok=True)
        partial = path.with_name(path.name + ".part")
        logger.info(f"{spec.key}: downloading {spec.url}")
        downloader(spec.url, partial, config.FETCH_TIMEOUT)
        try:
            dataset = load_csv(spec, path=partial)
        except DataError as e:
            partial.unlink(missing_ok=True)
            raise FetchError(f"{spec.key}: downloaded file failed verification: {e}") from e
        os.replace(partial, path)
        logger.info(f"{spec.key}: saved {dataset.num_rows} rows to {path}")
        return FetchResult(key=spec.key, path=path, downloaded=True, rows=dataset.num_rows)
