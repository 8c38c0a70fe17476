"""JSON model document for FuzzyClassifier"""
import json
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from utils.errors import ModelIntegrityError

from .fuzzy_classifier import FuzzyClassifier, MembershipBank, RuleBase

FORMAT_VERSION = 1

InputScaling = Tuple[np.ndarray, np.ndarray]


def classifier_to_dict(model: FuzzyClassifier, input_scaling: Optional[InputScaling] = None) -> Dict[str, Any]:
    """
    Self-describing document for a classifier.

    Args:
        model: Classifier to describe
        input_scaling: Optional (feature_min, feature_max) learned at training time,
            so raw rows can be scaled before inference

    Returns:
        JSON-compatible dict
    """
    document = {
        "version": FORMAT_VERSION,
        "num_inputs": model.num_inputs,
        "num_classes": model.num_classes,
        "mfs_per_input": model.mfs_per_input,
        "num_rules": model.num_rules,
        "seed": model.seed,
        "centers": model.banks.centers.tolist(),
        "width_params": model.banks.width_params.tolist(),
        "antecedents": model.rules.antecedents.tolist(),
        "consequents": model.rules.consequents.tolist(),
    }
    if model.feature_names is not None:
        document["feature_names"] = list(model.feature_names)
    if model.class_names is not None:
        document["class_names"] = list(model.class_names)
    if input_scaling is not None:
        feature_min, feature_max = input_scaling
        document["input_scaling"] = {
            "min": np.asarray(feature_min, dtype=np.float64).tolist(),
            "max": np.asarray(feature_max, dtype=np.float64).tolist(),
        }
    return document


def classifier_from_dict(document: Dict[str, Any]) -> FuzzyClassifier:
    """Inverse of classifier_to_dict(); `input_scaling` is ignored here."""
    version = document.get("version")
    if version != FORMAT_VERSION:
        raise ModelIntegrityError(f"Unsupported model document version: {version!r}")
    try:
        d = int(document["num_inputs"])
        c = int(document["num_classes"])
        m = int(document["mfs_per_input"])
        r = int(document["num_rules"])
        centers = np.asarray(document["centers"], dtype=np.float64).reshape(d, m)
        width_params = np.asarray(document["width_params"], dtype=np.float64).reshape(d, m)
        antecedents = np.asarray(document["antecedents"], dtype=np.int64).reshape(r, d)
        consequents = np.asarray(document["consequents"], dtype=np.float64).reshape(r, c)
        seed = int(document["seed"])
    except (KeyError, TypeError, ValueError) as e:
        raise ModelIntegrityError(f"Malformed model document: {e}") from e

    return FuzzyClassifier(
        banks=MembershipBank(centers=centers, width_params=width_params),
        rules=RuleBase(antecedents=antecedents, consequents=consequents),
        num_inputs=d,
        num_classes=c,
        seed=seed,
        feature_names=document.get("feature_names"),
        class_names=document.get("class_names"),
    )


def save_classifier(model: FuzzyClassifier, path: Path, input_scaling: Optional[InputScaling] = None) -> Path:
    """Write the model document to `path` and return the path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # repr-precision floats, so a reload reproduces every parameter bit for bit
    path.write_text(json.dumps(classifier_to_dict(model, input_scaling), indent=2), encoding="utf-8")
    return path


def _read_document(path: Path) -> Dict[str, Any]:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ModelIntegrityError(f"{path} is not a valid model document: {e}") from e


def load_classifier(path: Path) -> FuzzyClassifier:
    """Read a model document written by save_classifier()."""
    return classifier_from_dict(_read_document(path))


def load_input_scaling(path: Path) -> Optional[InputScaling]:
    """The (feature_min, feature_max) stored with a model, if any."""
    scaling = _read_document(path).get("input_scaling")
    if scaling is None:
        return None
    return np.asarray(scaling["min"], dtype=np.float64), np.asarray(scaling["max"], dtype=np.float64)
