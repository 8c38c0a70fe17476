from .errors import (
    ConfigurationError,
    DataError,
    FetchError,
    FuzzyClassifierError,
    IncompleteRunError,
    ModelIntegrityError,
    NumericError,
    ShapeError,
)
from .log import setup_logging

__all__ = [
    'ConfigurationError', 'DataError', 'FetchError', 'FuzzyClassifierError', 'IncompleteRunError',
    'ModelIntegrityError', 'NumericError', 'ShapeError', 'setup_logging',
]
