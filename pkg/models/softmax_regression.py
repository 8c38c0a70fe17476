"""Multinomial logistic regression used as the harness sanity baseline"""
from dataclasses import dataclass

import numpy as np

from utils.errors import ConfigurationError, ShapeError
from utils.numerics import softmax


@dataclass(frozen=True, eq=False)
class SoftmaxRegression:
    """
    Linear model: logits = X @ weights + bias.

    Attributes:
        weights: [num_inputs, num_classes]
        bias: [num_classes]
    """
    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        bias = np.array(self.bias, dtype=np.float64)
        if weights.ndim != 2 or bias.shape != (weights.shape[1],):
            raise ShapeError(f"weights {weights.shape} and bias {bias.shape} do not agree")
        weights.setflags(write=False)
        bias.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", bias)

    @property
    def num_inputs(self) -> int:
        return self.weights.shape[0]

    @property
    def num_classes(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, num_inputs: int, num_classes: int) -> "SoftmaxRegression":
        if num_inputs < 1 or num_classes < 2:
            raise ConfigurationError("Softmax regression needs num_inputs >= 1 and num_classes >= 2")
        return cls(weights=np.zeros((num_inputs, num_classes)), bias=np.zeros(num_classes))

    def logits(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.num_inputs:
            raise ShapeError(f"Expected a batch of shape (N, {self.num_inputs}), got {X.shape}")
        return X @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.logits(X), axis=1)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(X), axis=1)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.bias])

    def with_parameters(self, params: np.ndarray) -> "SoftmaxRegression":
        d, c = self.weights.shape
        params = np.asarray(params, dtype=np.float64)
        if params.shape != (d * c + c,):
            raise ShapeError(f"Expected {d * c + c} parameters, got shape {params.shape}")
        return SoftmaxRegression(weights=params[:d * c].reshape(d, c), bias=params[d * c:])
