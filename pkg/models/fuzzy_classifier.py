"""
Zero-order TSK Fuzzy Classifier

Architecture: x (D) → Gaussian MFs per input (D × M) → product t-norm per rule (R)
                    → normalized firings (R) → firing-weighted rule logits (C) → softmax

Every rule binds exactly one MF per input. Antecedent indices are fixed at
initialization; centers, widths and consequents are the trainable parameters.
All arithmetic is float64.
"""
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from config import config
from utils.errors import ConfigurationError, DataError, ModelIntegrityError, ShapeError
from utils.numerics import inverse_softplus, softmax, softplus

SIGMA_MIN = config.SIGMA_MIN
FIRING_EPS = config.FIRING_EPS


def _frozen(values, dtype) -> np.ndarray:
    """Copy `values` into a read-only array of `dtype`."""
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


def _check_antecedents(antecedents: np.ndarray, mfs_per_input: int) -> None:
    if antecedents.size and (antecedents.min() < 0 or antecedents.max() >= mfs_per_input):
        bad = np.argwhere((antecedents < 0) | (antecedents >= mfs_per_input))[0]
        raise ModelIntegrityError(
            f"Antecedent index {antecedents[tuple(bad)]} at rule {bad[0]}, input {bad[1]} "
            f"is outside [0, {mfs_per_input})"
        )


@dataclass(frozen=True, eq=False)
class MembershipBank:
    """
    Gaussian membership functions for every input dimension.

    Attributes:
        centers: MF centers [num_inputs, mfs_per_input]
        width_params: Unconstrained width parameters ρ, same shape.
            The actual width is σ = SIGMA_MIN + softplus(ρ).
    """
    centers: np.ndarray
    width_params: np.ndarray

    def __post_init__(self):
        centers = _frozen(self.centers, np.float64)
        width_params = _frozen(self.width_params, np.float64)
        if centers.ndim != 2 or centers.shape != width_params.shape:
            raise ShapeError(
                f"centers {centers.shape} and width_params {width_params.shape} must be equal 2-D shapes"
            )
        if not (np.all(np.isfinite(centers)) and np.all(np.isfinite(width_params))):
            raise ModelIntegrityError("Membership parameters must be finite")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "width_params", width_params)

    @property
    def num_inputs(self) -> int:
        return self.centers.shape[0]

    @property
    def mfs_per_input(self) -> int:
        return self.centers.shape[1]

    @property
    def sigmas(self) -> np.ndarray:
        return widths(self)


@dataclass(frozen=True, eq=False)
class RuleBase:
    """
    Rule structure and zero-order consequents.

    Attributes:
        antecedents: MF index per (rule, input) [num_rules, num_inputs]
        consequents: Logit contribution per (rule, class) [num_rules, num_classes]
    """
    antecedents: np.ndarray
    consequents: np.ndarray

    def __post_init__(self):
        antecedents = _frozen(self.antecedents, np.int64)
        consequents = _frozen(self.consequents, np.float64)
        if antecedents.ndim != 2 or consequents.ndim != 2:
            raise ShapeError("antecedents and consequents must be 2-D")
        if antecedents.shape[0] != consequents.shape[0]:
            raise ShapeError(
                f"antecedents have {antecedents.shape[0]} rules but consequents have {consequents.shape[0]}"
            )
        if not np.all(np.isfinite(consequents)):
            raise ModelIntegrityError("Consequents must be finite")
        object.__setattr__(self, "antecedents", antecedents)
        object.__setattr__(self, "consequents", consequents)

    @property
    def num_rules(self) -> int:
        return self.antecedents.shape[0]


@dataclass(frozen=True, eq=False)
class FuzzyClassifier:
    """
    Complete trainable parameter set plus descriptive metadata.

    Attributes:
        banks: Membership functions per input
        rules: Antecedent indices and consequent logits
        num_inputs: Input dimension D
        num_classes: Number of classes C (>= 2)
        seed: Seed the antecedent structure was drawn from
        feature_names: Optional input names used by rule export
        class_names: Optional class names used by rule export
    """
    banks: MembershipBank
    rules: RuleBase
    num_inputs: int
    num_classes: int
    seed: int = 0
    feature_names: Optional[Tuple[str, ...]] = None
    class_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        if self.num_classes < 2:
            raise ModelIntegrityError(f"A classifier needs at least 2 classes, got {self.num_classes}")
        if self.banks.num_inputs != self.num_inputs:
            raise ModelIntegrityError(
                f"Membership banks cover {self.banks.num_inputs} inputs, model declares {self.num_inputs}"
            )
        if self.rules.antecedents.shape[1] != self.num_inputs:
            raise ModelIntegrityError(
                f"Antecedent matrix has {self.rules.antecedents.shape[1]} columns, model declares {self.num_inputs} inputs"
            )
        if self.rules.consequents.shape[1] != self.num_classes:
            raise ModelIntegrityError(
                f"Consequent matrix has {self.rules.consequents.shape[1]} columns, model declares {self.num_classes} classes"
            )
        _check_antecedents(self.rules.antecedents, self.banks.mfs_per_input)
        if self.feature_names is not None:
            object.__setattr__(self, "feature_names", tuple(self.feature_names))
            if len(self.feature_names) != self.num_inputs:
                raise ModelIntegrityError("feature_names length must equal num_inputs")
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))
            if len(self.class_names) != self.num_classes:
                raise ModelIntegrityError("class_names length must equal num_classes")

    @property
    def mfs_per_input(self) -> int:
        return self.banks.mfs_per_input

    @property
    def num_rules(self) -> int:
        return self.rules.num_rules


class ForwardIntermediates(NamedTuple):
    """Batch forward pass with the values the gradient needs."""
    rule_centers: np.ndarray       # [R, D] center selected by each rule per input
    rule_sigmas: np.ndarray        # [R, D] width selected by each rule per input
    diffs: np.ndarray              # [N, R, D] x - selected center
    log_firings: np.ndarray        # [N, R] sum of log memberships
    peak_index: np.ndarray         # [N] rule with the largest log firing
    scaled_firings: np.ndarray     # [N, R] firings divided by the strongest one
    normalized_firings: np.ndarray # [N, R]
    logits: np.ndarray             # [N, C]
    probs: np.ndarray              # [N, C]


def widths(bank: MembershipBank) -> np.ndarray:
    """σ = SIGMA_MIN + softplus(ρ), elementwise."""
    return SIGMA_MIN + softplus(bank.width_params)


def gaussian_membership(x, center, sigma):
    """
    Gaussian membership degree exp(-(x - c)^2 / (2 σ^2)).

    Works elementwise on arrays; returns a float for scalar inputs.

    Raises:
        ConfigurationError: sigma <= 0
        DataError: non-finite x or center
    """
    x = np.asarray(x, dtype=np.float64)
    center = np.asarray(center, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(~(sigma > 0)):
        raise ConfigurationError("Membership width sigma must be > 0")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(center))):
        raise DataError("Non-finite value reached a membership function (corrupt input data?)")
    result = np.exp(-((x - center) ** 2) / (2.0 * sigma ** 2))
    return float(result) if result.ndim == 0 else result


def _as_row(model: FuzzyClassifier, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.num_inputs:
        raise ShapeError(f"Expected a feature vector of length {model.num_inputs}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("Feature vector contains non-finite values")
    return x


def _as_batch(model: FuzzyClassifier, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.num_inputs:
        raise ShapeError(f"Expected a batch of shape (N, {model.num_inputs}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise DataError("Batch contains non-finite values")
    return X


def fuzzify(model: FuzzyClassifier, x) -> np.ndarray:
    """Membership matrix [D, M] of one feature vector."""
    x = _as_row(model, x)
    return gaussian_membership(x[:, None], model.banks.centers, widths(model.banks))


def firing_strengths(model: FuzzyClassifier, memberships: np.ndarray) -> np.ndarray:
    """
    Product t-norm of the memberships each rule selects.

    Args:
        model: Classifier providing the antecedent indices
        memberships: Output of fuzzify() [D, M]

    Returns:
        Raw firing strength per rule [R]
    """
    memberships = np.asarray(memberships, dtype=np.float64)
    expected = (model.num_inputs, model.mfs_per_input)
    if memberships.shape != expected:
        raise ShapeError(f"Expected memberships of shape {expected}, got {memberships.shape}")
    antecedents = model.rules.antecedents
    _check_antecedents(antecedents, model.mfs_per_input)
    selected = memberships[np.arange(model.num_inputs)[None, :], antecedents]  # [R, D]
    return np.prod(selected, axis=1)


def normalize_firings(w, eps: float = FIRING_EPS) -> np.ndarray:
    """
    ŵ_r = w_r / (Σ_s w_s + eps).

    Accepts a single vector [R] or a batch [N, R] (normalized per row).
    An all-zero firing vector maps to all zeros.
    """
    w = np.asarray(w, dtype=np.float64)
    if np.any(w < 0):
        raise DataError("Firing strengths must be non-negative")
    return w / (np.sum(w, axis=-1, keepdims=True) + eps)


def forward_intermediates(model: FuzzyClassifier, X) -> ForwardIntermediates:
    """
    Batch forward pass keeping every intermediate.

    Firings are built in log space and rescaled so the strongest rule fires
    at 1 before normalize_firings() applies the eps guard. With 20-30 inputs
    the raw products underflow to 0.0 for every rule.
    """
    X = _as_batch(model, X)
    antecedents = model.rules.antecedents
    dims = np.arange(model.num_inputs)[None, :]
    rule_centers = model.banks.centers[dims, antecedents]
    rule_sigmas = widths(model.banks)[dims, antecedents]

    diffs = X[:, None, :] - rule_centers[None, :, :]
    log_firings = -0.5 * np.sum((diffs / rule_sigmas[None, :, :]) ** 2, axis=2)

    peak_index = np.argmax(log_firings, axis=1)
    peak = log_firings[np.arange(X.shape[0]), peak_index]
    scaled_firings = np.exp(log_firings - peak[:, None])
    normalized = normalize_firings(scaled_firings)

    logits = normalized @ model.rules.consequents
    probs = softmax(logits, axis=1)
    return ForwardIntermediates(
        rule_centers=rule_centers,
        rule_sigmas=rule_sigmas,
        diffs=diffs,
        log_firings=log_firings,
        peak_index=peak_index,
        scaled_firings=scaled_firings,
        normalized_firings=normalized,
        logits=logits,
        probs=probs,
    )


def forward_batch(model: FuzzyClassifier, X) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Forward pass for a batch.

    Returns:
        (logits [N, C], probs [N, C], normalized firings [N, R])
    """
    cache = forward_intermediates(model, X)
    return cache.logits, cache.probs, cache.normalized_firings


def forward(model: FuzzyClassifier, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Forward pass for one feature vector.

    Returns:
        (logits [C], probs [C], normalized firings [R])
    """
    x = _as_row(model, x)
    logits, probs, firings = forward_batch(model, x[None, :])
    return logits[0], probs[0], firings[0]


def predict(model: FuzzyClassifier, x) -> int:
    """Most probable class; ties go to the lowest class index."""
    _, probs, _ = forward(model, x)
    return int(np.argmax(probs))


def predict_batch(model: FuzzyClassifier, X) -> np.ndarray:
    """predict() for every row of X."""
    _, probs, _ = forward_batch(model, X)
    return np.argmax(probs, axis=1)


def init_classifier(
    num_inputs: int,
    num_classes: int,
    mfs_per_input: int,
    num_rules: int,
    seed: int,
    feature_names: Optional[Sequence[str]] = None,
    class_names: Optional[Sequence[str]] = None,
) -> FuzzyClassifier:
    """
    Build an untrained classifier.

    Centers are evenly spaced on [0, 1] (0.5 for a single MF), widths start at
    half the center spacing (0.25 for a single MF), antecedent indices are
    drawn uniformly from a generator seeded with `seed`, consequents are zero.

    Raises:
        ConfigurationError: any size below its minimum or a negative seed
    """
    for name, value, minimum in (
        ("num_inputs", num_inputs, 1),
        ("num_classes", num_classes, 2),
        ("mfs_per_input", mfs_per_input, 1),
        ("num_rules", num_rules, 1),
        ("seed", seed, 0),
    ):
        if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < minimum:
            raise ConfigurationError(f"{name} must be an integer >= {minimum}, got {value!r}")

    if mfs_per_input > 1:
        grid = np.arange(mfs_per_input, dtype=np.float64) / (mfs_per_input - 1)
        sigma0 = 0.5 / (mfs_per_input - 1)
    else:
        grid = np.array([0.5])
        sigma0 = 0.25
    if sigma0 <= SIGMA_MIN:
        raise ConfigurationError(
            f"{mfs_per_input} MFs per input give an initial width {sigma0:g} below the minimum {SIGMA_MIN:g}"
        )

    centers = np.tile(grid, (num_inputs, 1))
    width_params = np.full((num_inputs, mfs_per_input), inverse_softplus(sigma0 - SIGMA_MIN))

    rng = np.random.default_rng(int(seed))
    antecedents = rng.integers(0, mfs_per_input, size=(num_rules, num_inputs))
    consequents = np.zeros((num_rules, num_classes))

    return FuzzyClassifier(
        banks=MembershipBank(centers=centers, width_params=width_params),
        rules=RuleBase(antecedents=antecedents, consequents=consequents),
        num_inputs=int(num_inputs),
        num_classes=int(num_classes),
        seed=int(seed),
        feature_names=tuple(feature_names) if feature_names is not None else None,
        class_names=tuple(class_names) if class_names is not None else None,
    )


def flatten_parameters(model: FuzzyClassifier) -> np.ndarray:
    """Trainable parameters as one vector: centers, width_params, consequents (row-major)."""
    return np.concatenate([
        model.banks.centers.ravel(),
        model.banks.width_params.ravel(),
        model.rules.consequents.ravel(),
    ])


def with_parameters(model: FuzzyClassifier, params: np.ndarray) -> FuzzyClassifier:
    """Copy of `model` whose trainable parameters come from a flat vector."""
    params = np.asarray(params, dtype=np.float64)
    d, m = model.banks.centers.shape
    r, c = model.rules.consequents.shape
    n_mf = d * m
    if params.shape != (2 * n_mf + r * c,):
        raise ShapeError(f"Expected {2 * n_mf + r * c} parameters, got shape {params.shape}")
    return FuzzyClassifier(
        banks=MembershipBank(
            centers=params[:n_mf].reshape(d, m),
            width_params=params[n_mf:2 * n_mf].reshape(d, m),
        ),
        rules=RuleBase(
            antecedents=model.rules.antecedents,
            consequents=params[2 * n_mf:].reshape(r, c),
        ),
        num_inputs=model.num_inputs,
        num_classes=model.num_classes,
        seed=model.seed,
        feature_names=model.feature_names,
        class_names=model.class_names,
    )


def parameter_names(model: FuzzyClassifier) -> List[str]:
    """Human-readable name for every entry of flatten_parameters()."""
    d, m = model.banks.centers.shape
    r, c = model.rules.consequents.shape
    names = [f"centers[{i},{j}]" for i in range(d) for j in range(m)]
    names += [f"width_params[{i},{j}]" for i in range(d) for j in range(m)]
    names += [f"consequents[{i},{j}]" for i in range(r) for j in range(c)]
    return names
