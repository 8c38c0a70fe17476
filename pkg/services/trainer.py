"""
Training Service: cross-entropy objective, analytic gradients and ADAM

Full-batch training for a fixed number of epochs (no early stopping,
no mini-batches, no schedules). The same ADAM loop also trains the
softmax-regression sanity baseline.
"""
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np

from config import config
from models.fuzzy_classifier import (
    FIRING_EPS,
    FuzzyClassifier,
    flatten_parameters,
    forward_intermediates,
    parameter_names,
    predict_batch,
    with_parameters,
)
from models.softmax_regression import SoftmaxRegression
from utils.errors import ConfigurationError, DataError, NumericError, ShapeError
from utils.numerics import logsumexp, sigmoid, softmax

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one training run."""
    max_epochs: int = config.MAX_EPOCHS
    lr: float = config.LEARNING_RATE
    beta1: float = config.ADAM_BETA1
    beta2: float = config.ADAM_BETA2
    eps: float = config.ADAM_EPS
    seed: int = config.SEED
    log_every: int = config.LOG_EVERY

    def __post_init__(self):
        if isinstance(self.max_epochs, bool) or not isinstance(self.max_epochs, (int, np.integer)) or self.max_epochs < 1:
            raise ConfigurationError(f"max_epochs must be an integer >= 1, got {self.max_epochs!r}")
        if not self.lr > 0:
            raise ConfigurationError(f"lr must be > 0, got {self.lr!r}")
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1), got {value!r}")
        if not self.eps > 0:
            raise ConfigurationError(f"eps must be > 0, got {self.eps!r}")
        if self.seed < 0:
            raise ConfigurationError(f"seed must be >= 0, got {self.seed!r}")
        if self.log_every < 0:
            raise ConfigurationError(f"log_every must be >= 0, got {self.log_every!r}")


@dataclass(frozen=True, eq=False)
class AdamState:
    """
    ADAM optimizer state.

    Attributes:
        first_moment: Running mean of gradients, shaped like the parameter vector
        second_moment: Running mean of squared gradients
        step_count: Number of updates applied so far
    """
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    lr: float = config.LEARNING_RATE
    beta1: float = config.ADAM_BETA1
    beta2: float = config.ADAM_BETA2
    eps: float = config.ADAM_EPS

    @classmethod
    def create(cls, size: int, train_config: Optional[TrainConfig] = None) -> "AdamState":
        tc = train_config or TrainConfig()
        return cls(
            first_moment=np.zeros(size),
            second_moment=np.zeros(size),
            step_count=0,
            lr=tc.lr,
            beta1=tc.beta1,
            beta2=tc.beta2,
            eps=tc.eps,
        )


@dataclass
class TrainRecord:
    """Outcome of one training run."""
    losses: List[float] = field(default_factory=list)
    final_train_accuracy: float = 0.0
    wall_clock_seconds: float = 0.0
    epochs_run: int = 0

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


def _check_labels(labels, num_classes: int, num_rows: Optional[int] = None) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeError(f"labels must be 1-D, got shape {labels.shape}")
    if labels.size and not np.issubdtype(labels.dtype, np.integer):
        raise DataError("labels must be integer class indices")
    if num_rows is not None and labels.shape[0] != num_rows:
        raise ShapeError(f"{labels.shape[0]} labels for {num_rows} rows")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise DataError(f"Labels must lie in [0, {num_classes}), got range [{labels.min()}, {labels.max()}]")
    return labels.astype(np.int64)


def cross_entropy_loss(probs, labels) -> float:
    """
    Mean negative log-likelihood of the labels under `probs` [N, C].
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ShapeError(f"probs must be 2-D, got shape {probs.shape}")
    labels = _check_labels(labels, probs.shape[1], probs.shape[0])
    picked = probs[np.arange(labels.shape[0]), labels]
    with np.errstate(divide="ignore"):
        return float(np.mean(-np.log(picked)))


def cross_entropy_from_logits(logits, labels) -> float:
    """Same loss computed from logits via log-sum-exp."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 2:
        raise ShapeError(f"logits must be 2-D, got shape {logits.shape}")
    labels = _check_labels(labels, logits.shape[1], logits.shape[0])
    picked = logits[np.arange(labels.shape[0]), labels]
    return float(np.mean(logsumexp(logits, axis=1) - picked))


def accuracy(predictions, labels) -> float:
    """Top-1 accuracy as a fraction (correct / total)."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ShapeError(f"{predictions.shape} predictions for {labels.shape} labels")
    if labels.size == 0:
        raise DataError("Cannot compute accuracy of an empty set")
    return float(np.mean(predictions == labels))


def loss_and_gradients(model: FuzzyClassifier, X, labels) -> Tuple[float, np.ndarray]:
    """
    Mean cross-entropy and its exact gradient over every trainable parameter.

    The gradient is laid out like flatten_parameters(): centers, width_params ρ,
    consequents. It flows softmax → weighted logit sum → eps-guarded
    normalization → peak rescaling → log product t-norm → Gaussian → softplus.
    """
    cache = forward_intermediates(model, X)
    n = cache.logits.shape[0]
    if n == 0:
        raise DataError("Cannot compute gradients on an empty batch")
    labels = _check_labels(labels, model.num_classes, n)
    rows = np.arange(n)

    loss = float(np.mean(logsumexp(cache.logits, axis=1) - cache.logits[rows, labels]))
    if not np.isfinite(loss):
        raise NumericError("Non-finite loss", location="loss")

    # dL/dz
    grad_logits = cache.probs.copy()
    grad_logits[rows, labels] -= 1.0
    grad_logits /= n

    consequents = model.rules.consequents
    grad_consequents = cache.normalized_firings.T @ grad_logits

    # through ŵ = u / (Σu + eps)
    grad_normalized = grad_logits @ consequents.T
    u = cache.scaled_firings
    total = np.sum(u, axis=1) + FIRING_EPS
    mean_grad = np.sum(grad_normalized * cache.normalized_firings, axis=1)
    grad_u = (grad_normalized - mean_grad[:, None]) / total[:, None]

    # through u = exp(ℓ - ℓ_peak)
    grad_log = grad_u * u
    grad_log[rows, cache.peak_index] -= np.sum(grad_u * u, axis=1)

    # through ℓ = -1/2 Σ_d ((x - c) / σ)^2
    sigmas = cache.rule_sigmas
    rule_grad_centers = np.einsum("nr,nrd->rd", grad_log, cache.diffs) / sigmas ** 2
    rule_grad_sigmas = np.einsum("nr,nrd->rd", grad_log, cache.diffs ** 2) / sigmas ** 3

    antecedents = model.rules.antecedents
    dims = np.broadcast_to(np.arange(model.num_inputs)[None, :], antecedents.shape)
    grad_centers = np.zeros_like(model.banks.centers)
    grad_sigmas = np.zeros_like(model.banks.centers)
    np.add.at(grad_centers, (dims, antecedents), rule_grad_centers)
    np.add.at(grad_sigmas, (dims, antecedents), rule_grad_sigmas)

    # σ = σ_min + softplus(ρ)
    grad_width_params = grad_sigmas * sigmoid(model.banks.width_params)

    grad = np.concatenate([grad_centers.ravel(), grad_width_params.ravel(), grad_consequents.ravel()])
    if not np.all(np.isfinite(grad)):
        bad = int(np.flatnonzero(~np.isfinite(grad))[0])
        raise NumericError("Non-finite gradient", location=parameter_names(model)[bad])
    return loss, grad


def gradients(model: FuzzyClassifier, X, labels) -> np.ndarray:
    """Gradient of the mean cross-entropy, laid out like flatten_parameters()."""
    return loss_and_gradients(model, X, labels)[1]


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> Tuple[np.ndarray, AdamState]:
    """
    One bias-corrected ADAM update.

    Returns:
        (new parameters, new state); the inputs are left untouched
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or params.shape != state.first_moment.shape:
        raise ShapeError(
            f"ADAM shapes disagree: params {params.shape}, grads {grads.shape}, state {state.first_moment.shape}"
        )
    step = state.step_count + 1
    first = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads
    second = state.beta2 * state.second_moment + (1.0 - state.beta2) * grads ** 2
    first_hat = first / (1.0 - state.beta1 ** step)
    second_hat = second / (1.0 - state.beta2 ** step)
    new_params = params - state.lr * first_hat / (np.sqrt(second_hat) + state.eps)
    new_state = AdamState(
        first_moment=first,
        second_moment=second,
        step_count=step,
        lr=state.lr,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
    )
    return new_params, new_state


def _run_adam(params: np.ndarray, objective: Objective, train_config: TrainConfig, name: str) -> Tuple[np.ndarray, List[float]]:
    """Full-batch ADAM for exactly max_epochs; returns final params and per-epoch loss."""
    state = AdamState.create(params.shape[0], train_config)
    losses: List[float] = []
    for epoch in range(1, train_config.max_epochs + 1):
        try:
            loss, grads = objective(params)
        except NumericError as e:
            raise NumericError(f"{name} diverged", epoch=epoch, location=e.location) from e
        if not np.isfinite(loss):
            raise NumericError(f"{name} diverged: loss is {loss}", epoch=epoch)
        losses.append(loss)
        params, state = adam_step(params, grads, state)

        if train_config.log_every and (epoch % train_config.log_every == 0 or epoch == train_config.max_epochs):
            logger.info(f"{name} epoch {epoch}/{train_config.max_epochs}: loss {loss:.6f}")
        else:
            logger.debug(f"{name} epoch {epoch}: loss {loss:.6f}")
    return params, losses


def _check_training_set(X, labels, num_classes: int) -> Tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DataError(f"Training set must be a non-empty 2-D matrix, got shape {X.shape}")
    labels = _check_labels(labels, num_classes, X.shape[0])
    return X, labels


def train(model: FuzzyClassifier, X, labels, train_config: Optional[TrainConfig] = None) -> Tuple[FuzzyClassifier, TrainRecord]:
    """
    Train a fuzzy classifier with full-batch ADAM.

    Args:
        model: Starting point (usually from init_classifier())
        X: Training features [N, D]
        labels: Class indices [N]
        train_config: Hyperparameters (defaults from config)

    Returns:
        (trained model, training record)

    Raises:
        NumericError: loss or gradient became non-finite (carries the epoch)
    """
    train_config = train_config or TrainConfig()
    X, labels = _check_training_set(X, labels, model.num_classes)

    def objective(params: np.ndarray) -> Tuple[float, np.ndarray]:
        return loss_and_gradients(with_parameters(model, params), X, labels)

    start = time.perf_counter()
    params, losses = _run_adam(flatten_parameters(model), objective, train_config, "GF")
    seconds = time.perf_counter() - start

    trained = with_parameters(model, params)
    record = TrainRecord(
        losses=losses,
        final_train_accuracy=accuracy(predict_batch(trained, X), labels),
        wall_clock_seconds=seconds,
        epochs_run=len(losses),
    )
    logger.info(
        f"GF trained: {record.epochs_run} epochs, loss {record.final_loss:.6f}, "
        f"train accuracy {record.final_train_accuracy:.4f}, {seconds:.3f}s"
    )
    return trained, record


def train_baseline_softmax_regression(
    X,
    labels,
    train_config: Optional[TrainConfig] = None,
    num_classes: Optional[int] = None,
) -> Tuple[SoftmaxRegression, TrainRecord]:
    """
    Multinomial logistic regression from zero weights, trained by the same ADAM loop.

    Args:
        X: Training features [N, D]
        labels: Class indices [N]
        train_config: Hyperparameters (defaults from config)
        num_classes: Number of classes (default: max label + 1, at least 2)
    """
    train_config = train_config or TrainConfig()
    labels_array = np.asarray(labels)
    if num_classes is None:
        num_classes = max(2, int(labels_array.max()) + 1) if labels_array.size else 2
    X, labels = _check_training_set(X, labels_array, num_classes)
    model = SoftmaxRegression.zeros(X.shape[1], num_classes)
    n = X.shape[0]
    rows = np.arange(n)

    def objective(params: np.ndarray) -> Tuple[float, np.ndarray]:
        current = model.with_parameters(params)
        logits = current.logits(X)
        loss = float(np.mean(logsumexp(logits, axis=1) - logits[rows, labels]))
        grad_logits = softmax(logits, axis=1)
        grad_logits[rows, labels] -= 1.0
        grad_logits /= n
        grad = np.concatenate([(X.T @ grad_logits).ravel(), grad_logits.sum(axis=0)])
        if not np.all(np.isfinite(grad)):
            raise NumericError("Non-finite gradient", location="softmax regression")
        return loss, grad

    start = time.perf_counter()
    params, losses = _run_adam(model.flatten(), objective, train_config, "Softmax regression")
    seconds = time.perf_counter() - start

    trained = model.with_parameters(params)
    record = TrainRecord(
        losses=losses,
        final_train_accuracy=accuracy(trained.predict(X), labels),
        wall_clock_seconds=seconds,
        epochs_run=len(losses),
    )
    return trained, record


def write_loss_curve(record: TrainRecord, path: Path) -> Path:
    """Write one `epoch,loss` line per epoch (1-based)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{epoch},{loss!r}" for epoch, loss in enumerate(record.losses, start=1)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
