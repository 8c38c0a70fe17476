"""Tests for the fuzzy classifier forward pass and model document"""
import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from models.fuzzy_classifier import (
    FIRING_EPS,
    FuzzyClassifier,
    MembershipBank,
    RuleBase,
    firing_strengths,
    flatten_parameters,
    forward,
    forward_batch,
    fuzzify,
    gaussian_membership,
    init_classifier,
    normalize_firings,
    parameter_names,
    predict,
    predict_batch,
    widths,
    with_parameters,
)
from models.serialization import (
    classifier_from_dict,
    classifier_to_dict,
    load_classifier,
    load_input_scaling,
    save_classifier,
)
from utils.errors import ConfigurationError, DataError, ModelIntegrityError, ShapeError


def random_model(seed, num_inputs, mfs_per_input, num_rules, num_classes):
    """Initialized model with every trainable parameter perturbed."""
    rng = np.random.default_rng(seed)
    model = init_classifier(num_inputs, num_classes, mfs_per_input, num_rules, seed)
    params = flatten_parameters(model)
    params = params + rng.normal(0.0, 0.3, size=params.shape)
    return with_parameters(model, params)


def naive_forward(model, x):
    """Scalar loops over rules and inputs; log firings rescaled so the strongest rule fires at 1."""
    sigmas = widths(model.banks)
    log_w = []
    for r in range(model.num_rules):
        total = 0.0
        for d in range(model.num_inputs):
            m = model.rules.antecedents[r, d]
            c = model.banks.centers[d, m]
            s = sigmas[d, m]
            total += -((x[d] - c) ** 2) / (2.0 * s * s)
        log_w.append(total)
    peak = max(log_w)
    scaled = [math.exp(lw - peak) for lw in log_w]
    total = sum(scaled) + FIRING_EPS
    firings = [w / total for w in scaled]

    logits = []
    for k in range(model.num_classes):
        logits.append(sum(firings[r] * model.rules.consequents[r, k] for r in range(model.num_rules)))
    top = max(logits)
    exps = [math.exp(z - top) for z in logits]
    probs = [e / sum(exps) for e in exps]
    return np.array(logits), np.array(probs), np.array(firings)


def literal_forward(model, x):
    """Scalar loops with raw rule products normalized as w / (Σw + eps), no rescaling."""
    sigmas = widths(model.banks)
    raw = []
    for r in range(model.num_rules):
        product = 1.0
        for d in range(model.num_inputs):
            m = model.rules.antecedents[r, d]
            c = model.banks.centers[d, m]
            s = sigmas[d, m]
            product *= math.exp(-((x[d] - c) ** 2) / (2.0 * s * s))
        raw.append(product)
    total = sum(raw) + FIRING_EPS
    firings = [w / total for w in raw]

    logits = []
    for k in range(model.num_classes):
        logits.append(sum(firings[r] * model.rules.consequents[r, k] for r in range(model.num_rules)))
    top = max(logits)
    exps = [math.exp(z - top) for z in logits]
    probs = [e / sum(exps) for e in exps]
    return np.array(logits), np.array(probs), np.array(firings), sum(raw)


# ------------------------------
# Membership functions
# ------------------------------

def test_gaussian_membership_examples():
    """Peak at the center and closed forms one and two widths out."""
    assert gaussian_membership(0.5, 0.5, 0.1) == 1.0
    assert gaussian_membership(0.6, 0.5, 0.1) == pytest.approx(math.exp(-0.5), rel=1e-12)
    assert gaussian_membership(0.7, 0.5, 0.1) == pytest.approx(math.exp(-2.0), rel=1e-12)
    assert gaussian_membership(0.6, 0.5, 0.1) == pytest.approx(0.606531, abs=1e-6)
    assert gaussian_membership(0.7, 0.5, 0.1) == pytest.approx(0.135335, abs=1e-6)


def test_gaussian_membership_errors():
    """Non-positive width and non-finite inputs are rejected."""
    with pytest.raises(ConfigurationError):
        gaussian_membership(0.5, 0.5, 0.0)
    with pytest.raises(ConfigurationError):
        gaussian_membership(0.5, 0.5, -1.0)
    with pytest.raises(DataError):
        gaussian_membership(float("nan"), 0.5, 0.1)
    with pytest.raises(DataError):
        gaussian_membership(0.5, float("inf"), 0.1)


def test_gaussian_membership_bounds_and_decay():
    """Membership lies in (0, 1] and strictly decays with distance from the center."""
    distances = np.linspace(0.0, 0.5, 200)
    values = gaussian_membership(0.3 + distances, 0.3, 0.2)
    assert np.all(values > 0.0)
    assert np.all(values <= 1.0)
    assert values[0] == 1.0
    assert np.all(np.diff(values) < 0.0)
    # symmetric on the other side
    assert np.allclose(gaussian_membership(0.3 - distances, 0.3, 0.2), values, rtol=0, atol=1e-15)


def test_fuzzify_examples():
    """Single MF at the input value, and identical centers."""
    model = init_classifier(num_inputs=1, num_classes=2, mfs_per_input=1, num_rules=1, seed=0)
    assert np.allclose(fuzzify(model, [0.5]), [[1.0]])

    banks = MembershipBank(centers=np.full((2, 3), 0.4), width_params=np.zeros((2, 3)))
    rules = RuleBase(antecedents=[[0, 1]], consequents=[[0.0, 0.0]])
    model = FuzzyClassifier(banks=banks, rules=rules, num_inputs=2, num_classes=2)
    assert np.array_equal(fuzzify(model, [0.4, 0.4]), np.ones((2, 3)))


def test_fuzzify_matches_scalar_recomputation():
    """Every entry equals gaussian_membership on the same scalars."""
    model = random_model(7, num_inputs=2, mfs_per_input=3, num_rules=4, num_classes=2)
    x = np.array([0.2, 0.8])
    memberships = fuzzify(model, x)
    sigmas = widths(model.banks)
    for d in range(2):
        for m in range(3):
            expected = gaussian_membership(x[d], model.banks.centers[d, m], sigmas[d, m])
            assert abs(memberships[d, m] - expected) <= 1e-12


def test_fuzzify_shape_error():
    """Wrong feature count raises ShapeError."""
    model = init_classifier(3, 2, 2, 4, seed=1)
    with pytest.raises(ShapeError):
        fuzzify(model, [0.1, 0.2])


# ------------------------------
# Firing strengths and normalization
# ------------------------------

def test_firing_strengths_product():
    """Product of the selected memberships."""
    banks = MembershipBank(centers=[[0.0, 1.0], [0.0, 1.0]], width_params=np.zeros((2, 2)))
    rules = RuleBase(antecedents=[[0, 1], [1, 0]], consequents=np.zeros((2, 2)))
    model = FuzzyClassifier(banks=banks, rules=rules, num_inputs=2, num_classes=2)
    memberships = np.array([[0.5, 1.0], [1.0, 0.4]])
    w = firing_strengths(model, memberships)
    assert w[0] == pytest.approx(0.2, abs=1e-15)
    assert w[1] == 1.0


def test_firing_strengths_match_naive_loop():
    """R=3, D=2 random model against an explicit double loop."""
    model = random_model(5, num_inputs=2, mfs_per_input=3, num_rules=3, num_classes=2)
    memberships = fuzzify(model, [0.35, 0.6])
    w = firing_strengths(model, memberships)
    for r in range(3):
        expected = 1.0
        for d in range(2):
            expected *= memberships[d, model.rules.antecedents[r, d]]
        assert abs(w[r] - expected) <= 1e-12


def test_antecedent_out_of_range():
    """Antecedent indices outside [0, M) are a model-integrity error."""
    banks = MembershipBank(centers=np.zeros((2, 2)), width_params=np.zeros((2, 2)))
    with pytest.raises(ModelIntegrityError):
        FuzzyClassifier(
            banks=banks,
            rules=RuleBase(antecedents=[[0, 2]], consequents=[[0.0, 0.0]]),
            num_inputs=2,
            num_classes=2,
        )
    with pytest.raises(ModelIntegrityError):
        FuzzyClassifier(
            banks=banks,
            rules=RuleBase(antecedents=[[-1, 0]], consequents=[[0.0, 0.0]]),
            num_inputs=2,
            num_classes=2,
        )


def test_normalize_firings_examples():
    """Already normalized, equal pair, and the all-zero vector."""
    assert np.allclose(normalize_firings([0.2, 0.3, 0.5]), [0.2, 0.3, 0.5], rtol=0, atol=1e-9)
    assert np.allclose(normalize_firings([1.0, 1.0]), [0.5, 0.5], rtol=0, atol=1e-12)
    assert np.array_equal(normalize_firings([0.0, 0.0]), [0.0, 0.0])
    with pytest.raises(DataError):
        normalize_firings([0.5, -0.1])


def test_normalize_firings_sums_to_one_and_rescaling_invariance():
    """Σŵ = 1 and multiplying w by k > 0 leaves ŵ unchanged."""
    rng = np.random.default_rng(0)
    for _ in range(200):
        w = rng.uniform(0.05, 1.0, size=rng.integers(1, 10))
        normalized = normalize_firings(w)
        assert abs(normalized.sum() - 1.0) <= 1e-9
        for k in (0.5, 7.5, 1e4):
            assert np.allclose(normalize_firings(k * w), normalized, rtol=0, atol=1e-9)


# ------------------------------
# Forward pass
# ------------------------------

def test_zero_consequents_give_uniform_probabilities():
    """A freshly initialized model predicts 1/C everywhere."""
    model = init_classifier(num_inputs=4, num_classes=3, mfs_per_input=3, num_rules=10, seed=2)
    rng = np.random.default_rng(2)
    for x in rng.uniform(-0.5, 1.5, size=(20, 4)):
        logits, probs, _ = forward(model, x)
        assert np.array_equal(logits, np.zeros(3))
        assert np.allclose(probs, 1.0 / 3.0, rtol=0, atol=1e-15)


def test_single_rule_gives_softmax_of_its_consequent():
    """R=1: probs = softmax(q_1) for any input."""
    q = np.array([0.3, -1.2, 2.0])
    banks = MembershipBank(centers=[[0.0, 1.0]], width_params=np.zeros((1, 2)))
    rules = RuleBase(antecedents=[[1]], consequents=[q])
    model = FuzzyClassifier(banks=banks, rules=rules, num_inputs=1, num_classes=3)
    expected = np.exp(q - q.max()) / np.exp(q - q.max()).sum()
    for x in ([0.0], [0.5], [3.0]):
        _, probs, firings = forward(model, x)
        assert np.allclose(probs, expected, rtol=0, atol=1e-9)
        assert firings[0] == pytest.approx(1.0, abs=1e-11)


def test_forward_matches_naive_oracle_seed_7():
    """seed=7, D=2, M=2, R=3, C=2 against the scalar reimplementation."""
    model = random_model(7, num_inputs=2, mfs_per_input=2, num_rules=3, num_classes=2)
    for x in ([0.1, 0.9], [0.5, 0.5], [1.3, -0.2]):
        logits, probs, firings = forward(model, x)
        naive_logits, naive_probs, naive_firings = naive_forward(model, x)
        assert np.allclose(logits, naive_logits, rtol=0, atol=1e-12)
        assert np.allclose(probs, naive_probs, rtol=0, atol=1e-12)
        assert np.allclose(firings, naive_firings, rtol=0, atol=1e-12)


def test_forward_matches_naive_oracle_random_instances():
    """100 random small instances (D, M, R, C <= 5)."""
    rng = np.random.default_rng(1234)
    for trial in range(100):
        d, m, r = (int(v) for v in rng.integers(1, 6, size=3))
        c = int(rng.integers(2, 6))
        model = random_model(trial, d, m, r, c)
        x = rng.uniform(-0.2, 1.2, size=d)
        logits, probs, firings = forward(model, x)
        naive_logits, naive_probs, naive_firings = naive_forward(model, x)
        assert np.allclose(logits, naive_logits, rtol=0, atol=1e-12)
        assert np.allclose(probs, naive_probs, rtol=0, atol=1e-12)
        assert np.allclose(firings, naive_firings, rtol=0, atol=1e-12)


def test_forward_within_eps_of_literal_normalization():
    """100 random instances: forward differs from w / (Σw + eps) by at most eps / Σw."""
    rng = np.random.default_rng(4321)
    checked = 0
    for trial in range(100):
        d, m, r = (int(v) for v in rng.integers(1, 6, size=3))
        c = int(rng.integers(2, 6))
        model = random_model(trial, d, m, r, c)
        x = rng.uniform(-0.2, 1.2, size=d)
        logits, probs, firings = forward(model, x)
        literal_logits, literal_probs, literal_firings, raw_total = literal_forward(model, x)
        if raw_total < 1e-300:
            continue
        firing_tol = FIRING_EPS / raw_total + 1e-12
        logit_tol = firing_tol * max(1.0, float(np.abs(model.rules.consequents).max())) + 1e-12
        assert np.all(np.abs(firings - literal_firings) <= firing_tol)
        assert np.all(np.abs(logits - literal_logits) <= logit_tol)
        assert np.all(np.abs(probs - literal_probs) <= 2.0 * logit_tol)
        checked += 1
    assert checked >= 90


def test_weak_total_firing_still_normalizes_to_one():
    """One rule firing at 2e-6: Σŵ stays within 1e-9 of 1, unlike w / (w + eps)."""
    banks = MembershipBank(centers=[[0.0]], width_params=[[0.0]])
    rules = RuleBase(antecedents=[[0]], consequents=[[0.0, 1.0]])
    model = FuzzyClassifier(banks=banks, rules=rules, num_inputs=1, num_classes=2)
    sigma = float(widths(model.banks)[0, 0])
    x = [sigma * math.sqrt(2.0 * math.log(1.0 / 2e-6))]

    raw = firing_strengths(model, fuzzify(model, x))
    assert raw[0] == pytest.approx(2e-6, rel=1e-9)

    _, _, firings = forward(model, x)
    _, _, literal_firings, raw_total = literal_forward(model, x)
    assert abs(firings.sum() - 1.0) <= 1e-9
    assert literal_firings.sum() == pytest.approx(1.0 - FIRING_EPS / 2e-6, abs=1e-12)
    assert abs(literal_firings.sum() - 1.0) > 1e-9
    assert abs(firings[0] - literal_firings[0]) <= FIRING_EPS / raw_total


def test_forward_agrees_with_literal_normalization():
    """Peak-rescaled firings equal normalize_firings(w) on the raw products when Σw is not tiny."""
    model = random_model(3, num_inputs=3, mfs_per_input=3, num_rules=6, num_classes=3)
    rng = np.random.default_rng(3)
    checked = 0
    for x in rng.uniform(0.0, 1.0, size=(50, 3)):
        w = firing_strengths(model, fuzzify(model, x))
        if w.sum() < 1e-2:
            continue
        _, _, firings = forward(model, x)
        assert np.allclose(firings, normalize_firings(w), rtol=0, atol=1e-9)
        checked += 1
    assert checked > 0


def test_forward_survives_many_narrow_inputs():
    """30 inputs with 13 MFs: raw products underflow but probabilities stay informative."""
    model = init_classifier(num_inputs=30, num_classes=2, mfs_per_input=13, num_rules=50, seed=9)
    rng = np.random.default_rng(9)
    consequents = rng.normal(0.0, 1.0, size=(50, 2))
    model = FuzzyClassifier(
        banks=model.banks,
        rules=RuleBase(antecedents=model.rules.antecedents, consequents=consequents),
        num_inputs=30,
        num_classes=2,
    )
    x = np.full(30, 3.0)
    assert np.array_equal(firing_strengths(model, fuzzify(model, x)), np.zeros(50))
    _, probs, firings = forward(model, x)
    assert abs(firings.sum() - 1.0) <= 1e-9
    assert not np.allclose(probs, 0.5)


def test_probability_simplex():
    """1,000 random (model, x) pairs give non-negative probs summing to 1."""
    rng = np.random.default_rng(77)
    models = [random_model(s, 3, 3, 6, 4) for s in range(10)]
    for trial in range(1000):
        model = models[trial % 10]
        _, probs, firings = forward(model, rng.uniform(-0.5, 1.5, size=3))
        assert np.all(probs >= 0.0)
        assert abs(probs.sum() - 1.0) <= 1e-9
        assert abs(firings.sum() - 1.0) <= 1e-9


def test_forward_batch_matches_rows():
    """Batch forward is row-wise forward."""
    model = random_model(4, 3, 2, 5, 3)
    X = np.random.default_rng(4).uniform(0.0, 1.0, size=(6, 3))
    logits, probs, firings = forward_batch(model, X)
    for i, x in enumerate(X):
        row_logits, row_probs, row_firings = forward(model, x)
        assert np.allclose(logits[i], row_logits, rtol=0, atol=1e-15)
        assert np.allclose(probs[i], row_probs, rtol=0, atol=1e-15)
        assert np.allclose(firings[i], row_firings, rtol=0, atol=1e-15)
    assert np.array_equal(predict_batch(model, X), np.argmax(probs, axis=1))


def test_predict_tie_break_and_dominant_class():
    """Uniform probs go to class 0; consequents favoring class 2 give 2."""
    model = init_classifier(num_inputs=2, num_classes=3, mfs_per_input=2, num_rules=4, seed=0)
    assert predict(model, [0.3, 0.7]) == 0

    consequents = np.tile([0.0, 0.1, 2.0], (4, 1))
    favored = FuzzyClassifier(
        banks=model.banks,
        rules=RuleBase(antecedents=model.rules.antecedents, consequents=consequents),
        num_inputs=2,
        num_classes=3,
    )
    assert predict(favored, [0.3, 0.7]) == 2


# ------------------------------
# Initialization and parameters
# ------------------------------

def test_init_classifier_grid():
    """Evenly spaced centers and half-spacing widths."""
    two = init_classifier(num_inputs=2, num_classes=2, mfs_per_input=2, num_rules=3, seed=0)
    assert np.allclose(two.banks.centers, [[0.0, 1.0], [0.0, 1.0]])
    assert np.allclose(widths(two.banks), 0.5, rtol=0, atol=1e-12)

    three = init_classifier(num_inputs=1, num_classes=2, mfs_per_input=3, num_rules=3, seed=0)
    assert np.allclose(three.banks.centers, [[0.0, 0.5, 1.0]])
    assert np.allclose(widths(three.banks), 0.25, rtol=0, atol=1e-12)

    one = init_classifier(num_inputs=1, num_classes=2, mfs_per_input=1, num_rules=1, seed=0)
    assert np.allclose(one.banks.centers, [[0.5]])
    assert np.allclose(widths(one.banks), 0.25, rtol=0, atol=1e-12)


def test_init_classifier_is_deterministic():
    """Same sizes and seed give bit-identical models; another seed changes the rules."""
    a = init_classifier(5, 3, 4, 30, seed=42)
    b = init_classifier(5, 3, 4, 30, seed=42)
    c = init_classifier(5, 3, 4, 30, seed=43)
    assert np.array_equal(flatten_parameters(a), flatten_parameters(b))
    assert np.array_equal(a.rules.antecedents, b.rules.antecedents)
    assert not np.array_equal(a.rules.antecedents, c.rules.antecedents)
    assert a.rules.antecedents.min() >= 0 and a.rules.antecedents.max() < 4
    assert np.array_equal(a.rules.consequents, np.zeros((30, 3)))


@pytest.mark.parametrize(
    "sizes",
    [
        dict(num_inputs=0, num_classes=2, mfs_per_input=2, num_rules=1),
        dict(num_inputs=2, num_classes=1, mfs_per_input=2, num_rules=1),
        dict(num_inputs=2, num_classes=2, mfs_per_input=0, num_rules=1),
        dict(num_inputs=2, num_classes=2, mfs_per_input=2, num_rules=0),
    ],
)
def test_init_classifier_rejects_invalid_sizes(sizes):
    """Sizes below their minimum are configuration errors."""
    with pytest.raises(ConfigurationError):
        init_classifier(seed=0, **sizes)


def test_widths_stay_above_minimum():
    """σ > σ_min even for very negative ρ."""
    bank = MembershipBank(centers=np.zeros((1, 3)), width_params=[[-20.0, 0.0, 50.0]])
    sigmas = widths(bank)
    assert np.all(sigmas > 1e-3)
    assert sigmas[0, 2] == pytest.approx(50.0 + 1e-3)


def test_model_is_immutable():
    """Parameter arrays are read-only."""
    model = init_classifier(2, 2, 2, 3, seed=0)
    with pytest.raises(ValueError):
        model.banks.centers[0, 0] = 5.0
    with pytest.raises(ValueError):
        model.rules.consequents[0, 0] = 5.0


def test_flatten_and_parameter_names_line_up():
    """flatten_parameters, with_parameters and parameter_names share one layout."""
    model = random_model(1, num_inputs=2, mfs_per_input=3, num_rules=4, num_classes=2)
    params = flatten_parameters(model)
    names = parameter_names(model)
    assert len(names) == params.shape[0] == 2 * 6 + 4 * 2
    assert names[0] == "centers[0,0]"
    assert names[6] == "width_params[0,0]"
    assert names[-1] == "consequents[3,1]"
    rebuilt = with_parameters(model, params)
    assert np.array_equal(flatten_parameters(rebuilt), params)
    with pytest.raises(ShapeError):
        with_parameters(model, params[:-1])


# ------------------------------
# Model document
# ------------------------------

def test_save_load_reproduces_forward(tmp_path):
    """Round trip through the JSON document keeps forward outputs."""
    model = random_model(8, num_inputs=3, mfs_per_input=4, num_rules=7, num_classes=3)
    model = FuzzyClassifier(
        banks=model.banks,
        rules=model.rules,
        num_inputs=3,
        num_classes=3,
        seed=8,
        feature_names=("a", "b", "c"),
        class_names=("x", "y", "z"),
    )
    path = save_classifier(model, tmp_path / "model.json", input_scaling=([0.0, 1.0, 2.0], [1.0, 3.0, 4.0]))
    loaded = load_classifier(path)

    X = np.random.default_rng(8).uniform(0.0, 1.0, size=(10, 3))
    for original, reloaded in zip(forward_batch(model, X), forward_batch(loaded, X)):
        assert np.allclose(original, reloaded, rtol=0, atol=1e-15)
    assert np.array_equal(loaded.rules.antecedents, model.rules.antecedents)
    assert loaded.seed == 8
    assert loaded.feature_names == ("a", "b", "c")
    assert loaded.class_names == ("x", "y", "z")

    feature_min, feature_max = load_input_scaling(path)
    assert np.array_equal(feature_min, [0.0, 1.0, 2.0])
    assert np.array_equal(feature_max, [1.0, 3.0, 4.0])

    document = json.loads(path.read_text(encoding="utf-8"))
    for key in ("version", "num_inputs", "num_classes", "mfs_per_input", "num_rules", "seed",
                "centers", "width_params", "antecedents", "consequents"):
        assert key in document


def test_model_document_integrity_errors(tmp_path):
    """Wrong version, missing fields, bad antecedents and invalid JSON."""
    model = init_classifier(2, 2, 2, 3, seed=0)
    assert load_input_scaling(save_classifier(model, tmp_path / "plain.json")) is None

    document = classifier_to_dict(model)
    with pytest.raises(ModelIntegrityError):
        classifier_from_dict({**document, "version": 99})

    missing = dict(document)
    del missing["centers"]
    with pytest.raises(ModelIntegrityError):
        classifier_from_dict(missing)

    bad = dict(document)
    bad["antecedents"] = [[0, 5], [0, 0], [1, 1]]
    with pytest.raises(ModelIntegrityError):
        classifier_from_dict(bad)

    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ModelIntegrityError):
        load_classifier(broken)
