"""
Explain Service: linguistic rule export and per-prediction traces

Labels are assigned per input by ascending *trained* center, so "low" always
names the MF with the smallest center even after training reorders them.
Rule consequents are shown as raw logits; class probabilities only exist
after the firing-weighted sum goes through softmax.
"""
import re
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from models.fuzzy_classifier import FuzzyClassifier, forward
from utils.errors import ConfigurationError, ModelIntegrityError, ShapeError

NAMED_LEVELS = {
    2: ("low", "high"),
    3: ("low", "medium", "high"),
    5: ("very-low", "low", "medium", "high", "very-high"),
}

SOFTMAX_NOTE = "# consequents are logits; P(class | x) = softmax(sum_r w_r * logits_r) with w_r the normalized firing"

_CLAUSE = re.compile(r"(\S+) is (\S+)")


def level_names(mfs_per_input: int) -> Tuple[str, ...]:
    """Label set for M ordered MFs."""
    if mfs_per_input in NAMED_LEVELS:
        return NAMED_LEVELS[mfs_per_input]
    return tuple(f"level_{i}" for i in range(mfs_per_input))


@dataclass(frozen=True)
class LinguisticVocabulary:
    """
    labels[d][m] is the label of MF m on input d.

    Each input's labels are a permutation of level_names(M) that follows
    ascending center order.
    """
    labels: Tuple[Tuple[str, ...], ...]

    @property
    def mfs_per_input(self) -> int:
        return len(self.labels[0]) if self.labels else 0

    def label(self, input_index: int, mf_index: int) -> str:
        return self.labels[input_index][mf_index]

    def index_of(self, input_index: int, label: str) -> int:
        try:
            return self.labels[input_index].index(label)
        except ValueError:
            raise ConfigurationError(f"Unknown label {label!r} for input {input_index}") from None


@dataclass
class TraceEntry:
    rule_index: int
    text: str
    weight: float
    logits: List[float]


@dataclass
class PredictionTrace:
    """
    Why a prediction came out the way it did.

    Attributes:
        inputs: Feature vector the model saw
        entries: Top-k rules by normalized firing (descending)
        probs: Final class probabilities
        predicted: Predicted class index
        class_names: Names for the class indices
        firing_total: Sum of all R normalized firings
    """
    inputs: List[float]
    entries: List[TraceEntry]
    probs: List[float]
    predicted: int
    class_names: List[str]
    firing_total: float


def derive_vocabulary(model: FuzzyClassifier) -> LinguisticVocabulary:
    """Vocabulary from the model's current center order."""
    names = level_names(model.mfs_per_input)
    labels = []
    for centers in model.banks.centers:
        order = np.argsort(centers, kind="stable")
        per_mf = [""] * len(centers)
        for rank, mf_index in enumerate(order):
            per_mf[mf_index] = names[rank]
        labels.append(tuple(per_mf))
    return LinguisticVocabulary(labels=tuple(labels))


def _feature_names(model: FuzzyClassifier, feature_names: Optional[Sequence[str]]) -> List[str]:
    names = list(feature_names) if feature_names is not None else (
        list(model.feature_names) if model.feature_names is not None
        else [f"x{d}" for d in range(model.num_inputs)]
    )
    if len(names) != model.num_inputs:
        raise ShapeError(f"{len(names)} feature names for {model.num_inputs} inputs")
    if len(set(names)) != len(names) or any(not name or any(ch.isspace() for ch in name) for name in names):
        raise ConfigurationError("Feature names must be unique and contain no whitespace")
    return names


def _class_names(model: FuzzyClassifier) -> List[str]:
    if model.class_names is not None:
        return list(model.class_names)
    return [f"class_{c}" for c in range(model.num_classes)]


def _check_vocabulary(model: FuzzyClassifier, vocabulary: LinguisticVocabulary) -> None:
    if len(vocabulary.labels) != model.num_inputs or any(
        len(labels) != model.mfs_per_input for labels in vocabulary.labels
    ):
        raise ShapeError(
            f"Vocabulary covers {len(vocabulary.labels)} inputs x {vocabulary.mfs_per_input} MFs, "
            f"model has {model.num_inputs} x {model.mfs_per_input}"
        )


def _rule_text(
    model: FuzzyClassifier,
    rule_index: int,
    vocabulary: LinguisticVocabulary,
    names: List[str],
    classes: List[str],
) -> str:
    antecedent = " AND ".join(
        f"{names[d]} is {vocabulary.label(d, int(mf))}"
        for d, mf in enumerate(model.rules.antecedents[rule_index])
    )
    consequent = ", ".join(
        f"{classes[c]}={value:.4f}" for c, value in enumerate(model.rules.consequents[rule_index])
    )
    return f"IF {antecedent} THEN logits({consequent})"


def export_rules(
    model: FuzzyClassifier,
    vocabulary: Optional[LinguisticVocabulary] = None,
    feature_names: Optional[Sequence[str]] = None,
) -> str:
    """
    One line per rule, in rule-index order:
    `IF <feat> is <label> AND ... THEN logits(<class>=<value>, ...)`
    """
    vocabulary = vocabulary or derive_vocabulary(model)
    _check_vocabulary(model, vocabulary)
    names = _feature_names(model, feature_names)
    classes = _class_names(model)
    return "\n".join(
        _rule_text(model, r, vocabulary, names, classes) for r in range(model.num_rules)
    ) + "\n"


def parse_rule_antecedents(
    text: str,
    vocabulary: LinguisticVocabulary,
    feature_names: Sequence[str],
) -> np.ndarray:
    """
    Antecedent index matrix [R, D] recovered from export_rules() output.

    Lines that do not start with IF (comments, blanks) are skipped.
    """
    positions = {name: d for d, name in enumerate(feature_names)}
    rows = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line.startswith("IF "):
            continue
        antecedent = line[3:].split(" THEN ", 1)[0]
        row = [-1] * len(feature_names)
        for name, label in _CLAUSE.findall(antecedent):
            if name not in positions:
                raise ModelIntegrityError(f"Line {line_number}: unknown feature {name!r}")
            row[positions[name]] = vocabulary.index_of(positions[name], label)
        if -1 in row:
            raise ModelIntegrityError(f"Line {line_number}: rule does not cover every input")
        rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(len(rows), len(feature_names))


def trace(
    model: FuzzyClassifier,
    x,
    k: int = 5,
    vocabulary: Optional[LinguisticVocabulary] = None,
    feature_names: Optional[Sequence[str]] = None,
) -> PredictionTrace:
    """
    Forward pass plus the k rules with the largest normalized firing.

    k larger than the number of rules is clamped.
    """
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    vocabulary = vocabulary or derive_vocabulary(model)
    _check_vocabulary(model, vocabulary)
    names = _feature_names(model, feature_names)
    classes = _class_names(model)

    _, probs, firings = forward(model, x)
    k = min(k, model.num_rules)
    # stable sort on -ŵ keeps rule-index order among equal firings
    top = np.argsort(-firings, kind="stable")[:k]
    entries = [
        TraceEntry(
            rule_index=int(r),
            text=_rule_text(model, int(r), vocabulary, names, classes),
            weight=float(firings[r]),
            logits=model.rules.consequents[r].tolist(),
        )
        for r in top
    ]
    return PredictionTrace(
        inputs=np.asarray(x, dtype=np.float64).tolist(),
        entries=entries,
        probs=probs.tolist(),
        predicted=int(np.argmax(probs)),
        class_names=classes,
        firing_total=float(np.sum(firings)),
    )


def trace_to_dict(prediction_trace: PredictionTrace) -> Dict[str, Any]:
    return {
        "inputs": prediction_trace.inputs,
        "rules": [
            {"rule": e.rule_index, "text": e.text, "firing": e.weight, "logits": e.logits}
            for e in prediction_trace.entries
        ],
        "probabilities": dict(zip(prediction_trace.class_names, prediction_trace.probs)),
        "predicted": prediction_trace.predicted,
        "predicted_name": prediction_trace.class_names[prediction_trace.predicted],
        "firing_total": prediction_trace.firing_total,
    }


def format_trace(prediction_trace: PredictionTrace) -> str:
    lines = [f"Top {len(prediction_trace.entries)} rules by normalized firing:"]
    for entry in prediction_trace.entries:
        lines.append(f"  [{entry.rule_index}] w={entry.weight:.6f}  {entry.text}")
    lines.append("Probabilities:")
    for name, p in zip(prediction_trace.class_names, prediction_trace.probs):
        lines.append(f"  {name}: {p:.6f}")
    lines.append(
        f"Predicted: {prediction_trace.class_names[prediction_trace.predicted]} "
        f"(class {prediction_trace.predicted})"
    )
    return "\n".join(lines) + "\n"
