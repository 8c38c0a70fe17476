"""Configuration for the Gradient-Optimized Fuzzy Classifier"""
import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

_PROJECT_ROOT = Path(__file__).parent


@dataclass
class Config:
    # Paths (env vars override, CLI flags override env vars)
    PROJECT_ROOT: Path = _PROJECT_ROOT
    DATA_DIR: Path = None
    REPORT_DIR: Path = None

    # Dataset downloads
    UCI_BASE_URL: str = "https://archive.ics.uci.edu/ml/machine-learning-databases"
    FETCH_TIMEOUT: float = 60.0

    # Experiment protocol
    SEED: int = 42
    NUM_FOLDS: int = 5

    # Training (ADAM, full batch)
    MAX_EPOCHS: int = 250
    LEARNING_RATE: float = 0.05
    ADAM_BETA1: float = 0.9
    ADAM_BETA2: float = 0.999
    ADAM_EPS: float = 1e-8
    LOG_EVERY: int = 50

    # Model numerics
    SIGMA_MIN: float = 1e-3
    FIRING_EPS: float = 1e-12

    # Gradient check
    GRADCHECK_H: float = 1e-5
    GRADCHECK_TOLERANCE: float = 1e-4

    # Explain
    EXPLAIN_TOP_K: int = 5

    # Logging
    LOG_LEVEL: str = None

    def __post_init__(self):
        if self.DATA_DIR is None:
            self.DATA_DIR = Path(os.environ.get("GF_DATA_DIR", self.PROJECT_ROOT / "data"))
        if self.REPORT_DIR is None:
            self.REPORT_DIR = Path(os.environ.get("GF_REPORT_DIR", self.PROJECT_ROOT / "reports"))
        if self.LOG_LEVEL is None:
            self.LOG_LEVEL = os.environ.get("GF_LOG_LEVEL", "INFO")


# Global config instance
config = Config()
