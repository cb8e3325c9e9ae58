import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import graph_gradcheck, randomize
from intentmotion.classifier import (ClassifierConfig, classifier_graph, classify_forward,
                                     cross_entropy, init_classifier, loss_class,
                                     loss_class_graph, pool, predict_intention, softmax,
                                     vote_mode)
from intentmotion.errors import InvalidDimensionError
from intentmotion.numcore import Tape
from intentmotion.predictor import count_parameters

REFERENCE = 265_032
LN2 = math.log(2.0)


def hp_cross_entropy(z, label):
    """Cross-entropy in 50-digit decimal arithmetic."""
    getcontext().prec = 50
    zs = [Decimal(repr(float(v))) for v in z]
    lse = sum((v.exp() for v in zs), Decimal(0)).ln()
    return float(lse - zs[label])


def test_parameter_count_near_reference():
    w = init_classifier()
    total = count_parameters(w)
    assert abs(total - REFERENCE) <= 0.05 * REFERENCE
    assert total == 265_046
    assert "embedding" not in w


def test_pool_constant_rows():
    tape = Tape(record=False)
    row = np.random.default_rng(0).normal(size=27)
    h = tape.const(np.tile(row[:, None], (2, 1, 50)))  # (B, C, T), constant over T
    out = pool(h, ClassifierConfig(blocks=1, hidden=4))
    np.testing.assert_allclose(out.value[0], row, rtol=0, atol=1e-15)


def test_zero_head_gives_uniform(random_classifier, rng):
    for name in ("head.fc1.weight", "head.fc1.bias", "head.fc2.weight", "head.fc2.bias"):
        random_classifier[name] = 0.0
    logits, _ = classify_forward(random_classifier, rng.normal(size=(50, 27)))
    np.testing.assert_array_equal(logits, [0.0, 0.0])
    np.testing.assert_array_equal(softmax(logits), [0.5, 0.5])


def test_golden_logits():
    w = randomize(init_classifier(ClassifierConfig(blocks=4, hidden=32), seed=0), seed=6)
    x = np.random.default_rng(11).normal(size=(50, 27))
    logits, motion = classify_forward(w, x)
    again, _ = classify_forward(w, x)
    assert logits.tobytes() == again.tobytes()
    np.testing.assert_allclose(logits, [-0.2285831650590463, 0.1190733497302951],
                               rtol=0, atol=1e-12)
    np.testing.assert_allclose(motion.sum(), -52.76656583772571, rtol=0, atol=1e-11)


def test_motion_head_shape(random_classifier, rng):
    logits, motion = classify_forward(random_classifier, rng.normal(size=(4, 50, 27)))
    assert logits.shape == (4, 2) and motion.shape == (4, 10, 27)
    with pytest.raises(InvalidDimensionError):
        classify_forward(random_classifier, np.zeros((40, 27)))


@pytest.mark.parametrize("logits, label", [((0.2, 0.9), 1), ((3.0, 3.0), 0), ((-1.0, -2.0), 0)])
def test_predict_intention(logits, label):
    assert predict_intention(logits) == label


def test_cross_entropy_examples():
    assert abs(cross_entropy([0.3, 0.3], 0) - LN2) < 1e-12
    assert abs(cross_entropy([0.0, 0.0], 1) - LN2) < 1e-12
    ce = cross_entropy([1000.0, 0.0], 0)
    assert math.isfinite(ce) and ce < 1e-300
    assert math.isfinite(cross_entropy([1000.0, 0.0], 1))


@pytest.mark.parametrize("seed", range(10))
def test_cross_entropy_high_precision(seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(scale=5.0, size=2)
    for label in (0, 1):
        assert cross_entropy(z, label) == pytest.approx(hp_cross_entropy(z, label),
                                                        rel=1e-12, abs=1e-15)


def test_loss_class_examples(rng):
    g = rng.normal(size=(10, 27))
    parts = loss_class(np.zeros(2), g, g, 1)
    assert parts["re"] == 0.0 and parts["v"] == 0.0
    assert abs(parts["ce"] - LN2) < 1e-9 and abs(parts["total"] - LN2) < 1e-9
    totals = [loss_class([m, -m], g, g, 0)["total"] for m in (1.0, 5.0, 20.0, 100.0)]
    assert all(a > b for a, b in zip(totals, totals[1:]))
    assert 0.0 < totals[-1] < 1e-80


def test_loss_class_term_sum(rng):
    Z = rng.normal(size=(4, 2))
    M, G = rng.normal(size=(4, 10, 27)), rng.normal(size=(4, 10, 27))
    y = np.array([0, 1, 1, 0])
    parts = loss_class(Z, M, G, y)
    re = np.mean([np.sum((M[i] - G[i]) ** 2) for i in range(4)])
    v = np.mean([np.sum((np.diff(M[i], axis=0) - np.diff(G[i], axis=0)) ** 2) for i in range(4)])
    ce = np.mean([hp_cross_entropy(Z[i], y[i]) for i in range(4)])
    assert parts["re"] == pytest.approx(re, rel=1e-12)
    assert parts["v"] == pytest.approx(v, rel=1e-12)
    assert parts["ce"] == pytest.approx(ce, rel=1e-12)
    assert parts["total"] == pytest.approx(re + v + ce, rel=1e-12)


@pytest.mark.parametrize("labels, mode", [((0, 0, 1), 0), ((1, 1, 1), 1), ((0, 1, 0), 0),
                                          ((1, 0, 1), 1)])
def test_vote_mode(labels, mode):
    assert vote_mode(labels) == mode


def test_vote_mode_count():
    with pytest.raises(ValueError):
        vote_mode([0, 1])


def test_vote_mode_always_majority():
    for bits in range(8):
        labels = [(bits >> k) & 1 for k in range(3)]
        assert labels.count(vote_mode(labels)) >= 2


logit_pairs = arrays(np.float64, 2, elements=st.floats(-700, 700, allow_nan=False))


@settings(max_examples=100, deadline=None)
@given(logit_pairs)
def test_softmax_sums_to_one(z):
    assert abs(softmax(z).sum() - 1.0) < 1e-12


@settings(max_examples=100, deadline=None)
@given(logit_pairs, st.integers(0, 1))
def test_cross_entropy_non_negative(z, label):
    assert cross_entropy(z, label) >= 0.0


@settings(max_examples=100, deadline=None)
@given(logit_pairs, st.floats(-1e3, 1e3, allow_nan=False))
def test_argmax_shift_invariant(z, c):
    # shift only when it keeps the comparison exact in floating point
    shifted = z + c
    if (shifted[0] - shifted[1]) * (z[0] - z[1]) > 0:
        assert predict_intention(shifted) == predict_intention(z)


def test_loss_class_gradient(random_classifier, rng):
    x = rng.normal(size=(2, 50, 27))
    gt = rng.normal(size=(2, 10, 27))
    y = np.array([0, 1])
    cfg = random_classifier.config

    def build(tape, p):
        logits, motion = classifier_graph(tape, p, tape.const(x), cfg)
        return loss_class_graph(logits, motion, tape.const(gt), y)[0]

    assert graph_gradcheck(random_classifier, build) < 1e-6


def test_flat_pooling_variant(rng):
    cfg = ClassifierConfig(blocks=1, hidden=8, pooling="flat")
    w = randomize(init_classifier(cfg, seed=0), seed=1)
    assert w["head.fc1.weight"].shape == (50 * 27, 8)
    logits, _ = classify_forward(w, rng.normal(size=(50, 27)))
    assert logits.shape == (2,)
