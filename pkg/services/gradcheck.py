"""Finite-difference verification of the analytic gradients"""
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from config import config
from models.fuzzy_classifier import (
    FIRING_EPS,
    SIGMA_MIN,
    FuzzyClassifier,
    MembershipBank,
    RuleBase,
    flatten_parameters,
    init_classifier,
    parameter_names,
)
from utils.errors import ConfigurationError

from .trainer import loss_and_gradients

logger = logging.getLogger(__name__)

MIN_STEP = 1e-7
MAX_STEP = 1e-3


@dataclass
class GradCheckReport:
    """
    Analytic vs central-difference gradient, per parameter.

    relative_error_i = |g_i - ĝ_i| / max(1e-8, |g_i| + |ĝ_i|)
    """
    names: List[str]
    analytic: np.ndarray
    numeric: np.ndarray
    relative_errors: np.ndarray
    h: float

    @property
    def max_relative_error(self) -> float:
        return float(np.max(self.relative_errors)) if self.relative_errors.size else 0.0

    @property
    def worst_parameter(self) -> Optional[str]:
        if not self.relative_errors.size:
            return None
        return self.names[int(np.argmax(self.relative_errors))]

    def passed(self, tolerance: float = config.GRADCHECK_TOLERANCE) -> bool:
        return self.max_relative_error <= tolerance

    def errors_for(self, prefix: str) -> np.ndarray:
        """Relative errors of the parameters whose name starts with `prefix`."""
        mask = np.array([name.startswith(prefix) for name in self.names], dtype=bool)
        return self.relative_errors[mask]


def _extended_loss(model: FuzzyClassifier, params: np.ndarray, X: np.ndarray, labels: np.ndarray) -> np.longdouble:
    """
    Mean cross-entropy at `params`, evaluated in long double.

    A float64 loss differenced over 2h = 2e-5 carries ~1e-11 of round-off,
    which the 1e-8 floor of the relative error turns into 1e-3 for small
    gradients. Platforms without an extended type fall back to float64.
    """
    ld = np.longdouble
    d, m = model.banks.centers.shape
    r, c = model.rules.consequents.shape
    n_mf = d * m
    centers = params[:n_mf].reshape(d, m)
    sigmas = ld(SIGMA_MIN) + np.logaddexp(ld(0), params[n_mf:2 * n_mf].reshape(d, m))
    consequents = params[2 * n_mf:].reshape(r, c)

    antecedents = model.rules.antecedents
    dims = np.arange(d)[None, :]
    diffs = X[:, None, :] - centers[dims, antecedents][None, :, :]
    log_firings = -0.5 * np.sum((diffs / sigmas[dims, antecedents][None, :, :]) ** 2, axis=2)
    scaled = np.exp(log_firings - np.max(log_firings, axis=1, keepdims=True))
    normalized = scaled / (np.sum(scaled, axis=1, keepdims=True) + ld(FIRING_EPS))
    logits = np.sum(normalized[:, :, None] * consequents[None, :, :], axis=1)

    peak = np.max(logits, axis=1)
    lse = peak + np.log(np.sum(np.exp(logits - peak[:, None]), axis=1))
    return np.mean(lse - logits[np.arange(X.shape[0]), labels])


def finite_difference_gradcheck(model: FuzzyClassifier, X, labels, h: float = config.GRADCHECK_H) -> GradCheckReport:
    """
    Compare loss_and_gradients() against (L(θ_i + h) - L(θ_i - h)) / 2h for every θ_i.

    Raises:
        ConfigurationError: h outside [1e-7, 1e-3]
    """
    if not MIN_STEP <= h <= MAX_STEP:
        raise ConfigurationError(f"Finite-difference step h must lie in [{MIN_STEP:g}, {MAX_STEP:g}], got {h!r}")
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)

    _, analytic = loss_and_gradients(model, X, labels)
    params = flatten_parameters(model).astype(np.longdouble)
    X_ext = X.astype(np.longdouble)
    step = np.longdouble(h)
    numeric = np.empty(params.size, dtype=np.float64)
    for i in range(params.size):
        shifted = params.copy()
        shifted[i] = params[i] + step
        loss_plus = _extended_loss(model, shifted, X_ext, labels)
        shifted[i] = params[i] - step
        loss_minus = _extended_loss(model, shifted, X_ext, labels)
        numeric[i] = float((loss_plus - loss_minus) / (2 * step))

    relative = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    return GradCheckReport(
        names=parameter_names(model),
        analytic=analytic,
        numeric=numeric,
        relative_errors=relative,
        h=h,
    )


def random_instance(
    seed: int,
    num_inputs: int = 3,
    mfs_per_input: int = 3,
    num_rules: int = 5,
    num_classes: int = 3,
    batch: int = 8,
):
    """
    Small random model and batch for gradient checking.

    Centers are jittered, widths and consequents randomized, so every
    parameter carries a non-trivial gradient.

    Returns:
        (model, X, labels)
    """
    if min(num_inputs, mfs_per_input, num_rules, batch) < 1 or num_classes < 2:
        raise ConfigurationError("Gradient-check sizes must be >= 1 (classes >= 2)")
    rng = np.random.default_rng(seed)
    base = init_classifier(num_inputs, num_classes, mfs_per_input, num_rules, seed)
    model = FuzzyClassifier(
        banks=MembershipBank(
            centers=base.banks.centers + rng.normal(0.0, 0.05, size=base.banks.centers.shape),
            width_params=base.banks.width_params + rng.normal(0.0, 0.3, size=base.banks.width_params.shape),
        ),
        rules=RuleBase(
            antecedents=base.rules.antecedents,
            consequents=rng.normal(0.0, 1.0, size=base.rules.consequents.shape),
        ),
        num_inputs=num_inputs,
        num_classes=num_classes,
        seed=seed,
    )
    X = rng.uniform(0.0, 1.0, size=(batch, num_inputs))
    labels = rng.integers(0, num_classes, size=batch)
    return model, X, labels


def run_gradcheck(
    seed: int = config.SEED,
    num_inputs: int = 3,
    mfs_per_input: int = 3,
    num_rules: int = 5,
    num_classes: int = 3,
    batch: int = 8,
    h: float = config.GRADCHECK_H,
    trials: int = 1,
) -> List[GradCheckReport]:
    """Gradient check on `trials` random instances seeded seed, seed+1, ..."""
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials}")
    reports = []
    for trial in range(trials):
        model, X, labels = random_instance(seed + trial, num_inputs, mfs_per_input, num_rules, num_classes, batch)
        report = finite_difference_gradcheck(model, X, labels, h)
        logger.info(
            f"gradcheck seed {seed + trial}: max relative error {report.max_relative_error:.3e} "
            f"at {report.worst_parameter}"
        )
        reports.append(report)
    return reports
