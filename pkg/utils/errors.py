"""Exception hierarchy shared by models, services and the CLI"""
from typing import Optional


class FuzzyClassifierError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(FuzzyClassifierError):
    """Invalid sizes, hyperparameters or command-line overrides."""


class ShapeError(FuzzyClassifierError):
    """Array dimensions disagree with the model or with each other."""


class ModelIntegrityError(FuzzyClassifierError):
    """A model (or model document) violates its structural invariants."""


class DataError(FuzzyClassifierError):
    """Input data is missing, malformed or outside its declared domain."""


class FetchError(DataError):
    """A dataset download failed or produced an unusable file."""


class NumericError(FuzzyClassifierError):
    """
    A loss or gradient became non-finite.

    Attributes:
        epoch: Training epoch (1-based) at which it happened, if known
        location: Parameter name or stage that produced the bad value
    """

    def __init__(self, message: str, epoch: Optional[int] = None, location: Optional[str] = None):
        details = []
        if epoch is not None:
            details.append(f"epoch {epoch}")
        if location:
            details.append(location)
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.epoch = epoch
        self.location = location


class IncompleteRunError(DataError):
    """
    A multi-dataset run finished with some datasets failed.

    Attributes:
        results: Reports of the datasets that completed
        failures: dataset key -> error message
    """

    def __init__(self, message: str, results: Optional[list] = None, failures: Optional[dict] = None):
        super().__init__(message)
        self.results = list(results or [])
        self.failures = dict(failures or {})
