from .fuzzy_classifier import (
    FuzzyClassifier,
    MembershipBank,
    RuleBase,
    forward,
    forward_batch,
    init_classifier,
    predict,
    predict_batch,
)
from .serialization import load_classifier, save_classifier
from .softmax_regression import SoftmaxRegression

__all__ = [
    'FuzzyClassifier', 'MembershipBank', 'RuleBase',
    'forward', 'forward_batch', 'init_classifier', 'predict', 'predict_batch',
    'load_classifier', 'save_classifier', 'SoftmaxRegression',
]
