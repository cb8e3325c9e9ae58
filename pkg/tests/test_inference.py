import tracemalloc

import numpy as np
import pytest

from intentmotion.inference import block_labels, classify_then_predict, rollout
from intentmotion.predictor import PredictorConfig, forward, init_weights


def _stub(labels):
    """Classifier stand-in that returns the given labels in turn and a constant motion."""
    it = iter(labels)

    def run(window):
        label = next(it)
        logits = np.array([1.0, 0.0]) if label == 0 else np.array([0.0, 1.0])
        return logits, np.repeat(window[-1:], 10, axis=0)

    return run


def test_horizon_10_is_one_forward(random_predictor, rng):
    x = rng.normal(size=(50, 27))
    np.testing.assert_array_equal(rollout(random_predictor, x, 1, 10), forward(random_predictor, x, 1))


def test_horizon_25_blocks(random_predictor, rng):
    x = rng.normal(size=(50, 27))
    out = rollout(random_predictor, x, 0, 25)
    assert out.shape == (25, 27)
    first = forward(random_predictor, x, 0)
    window = np.concatenate([x[10:], first])
    second = forward(random_predictor, window, 0)
    np.testing.assert_array_equal(out[:20], np.concatenate([first, second]))


def test_zero_weights_hold_last_frame(rng):
    w = init_weights(PredictorConfig(blocks=2))
    w.flat[:] = 0.0
    x = rng.normal(size=(50, 27))
    np.testing.assert_array_equal(rollout(w, x, 0, 25), np.tile(x[-1], (25, 1)))


@pytest.mark.parametrize("h1, h2", [(10, 10), (20, 30)])
def test_prefix_property(random_predictor, rng, h1, h2):
    x = rng.normal(size=(50, 27))
    long = rollout(random_predictor, x, 1, h1 + h2)
    np.testing.assert_array_equal(long[:h1], rollout(random_predictor, x, 1, h1))


def test_seed_window_untouched(random_predictor, rng):
    x = rng.normal(size=(50, 27))
    before = x.copy()
    rollout(random_predictor, x, 0, 30)
    np.testing.assert_array_equal(x, before)


def test_batched_rollout(random_predictor, rng):
    X = rng.normal(size=(2, 50, 27))
    out = rollout(random_predictor, X, np.array([0, 1]), 15)
    np.testing.assert_allclose(out[1], rollout(random_predictor, X[1], 1, 15), rtol=0, atol=1e-12)


def test_bad_horizon(random_predictor):
    with pytest.raises(ValueError):
        rollout(random_predictor, np.zeros((50, 27)), 0, 0)


def test_constant_classifier_equals_rollout(random_predictor, rng):
    x = rng.normal(size=(50, 27))
    motion, label, labels = classify_then_predict(_stub([0, 0, 0]), random_predictor, x, 25)
    assert label == 0 and labels == [0, 0, 0]
    np.testing.assert_array_equal(motion, rollout(random_predictor, x, 0, 25))


def test_vote_over_blocks(random_predictor, rng):
    x = rng.normal(size=(50, 27))
    motion, label, labels = classify_then_predict(_stub([1, 0, 1]), random_predictor, x, 25)
    assert labels == [1, 0, 1] and label == 1
    np.testing.assert_array_equal(motion, rollout(random_predictor, x, 1, 25))


def test_once_mode_repeats_seed_label(rng):
    assert block_labels(_stub([1]), rng.normal(size=(50, 27)), per_block=False) == [1, 1, 1]


def test_classifier_sees_extended_windows(rng):
    seen = []

    def run(window):
        seen.append(window.copy())
        return np.array([1.0, 0.0]), np.full((10, 27), float(len(seen)))

    x = rng.normal(size=(50, 27))
    block_labels(run, x)
    np.testing.assert_array_equal(seen[0], x)
    np.testing.assert_array_equal(seen[1][:40], x[10:])
    np.testing.assert_array_equal(seen[1][40:], 1.0)
    np.testing.assert_array_equal(seen[2][30:40], 1.0)
    np.testing.assert_array_equal(seen[2][40:], 2.0)


def test_real_classifier(random_classifier, random_predictor, rng):
    x = rng.normal(size=(50, 27))
    a = classify_then_predict(random_classifier, random_predictor, x, 25)
    b = classify_then_predict(random_classifier, random_predictor, x, 25)
    assert a[1] == b[1] and a[2] == b[2]
    np.testing.assert_array_equal(a[0], b[0])


def _array_peak(weights, x, horizon):
    """Peak bytes of numpy array buffers alive during a rollout, minus its output."""
    rollout(weights, x, 0, 10)
    tracemalloc.start()
    tracemalloc.reset_peak()
    out = rollout(weights, x, 0, horizon)
    snap = tracemalloc.take_snapshot().filter_traces(
        [tracemalloc.DomainFilter(True, np.lib.tracemalloc_domain)])
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    retained = sum(stat.size for stat in snap.statistics("filename"))
    return peak - out.nbytes, retained - out.nbytes


def test_no_allocation_growth_across_blocks(rng):
    w = init_weights(PredictorConfig(blocks=2))
    x = rng.normal(size=(50, 27))
    short_peak, short_kept = _array_peak(w, x, 40)
    long_peak, long_kept = _array_peak(w, x, 4000)
    # keeping one 50x27 window per block would add about 4 MB over 400 blocks;
    # the slack covers interpreter free lists, which are bounded
    assert long_peak <= short_peak + 256 * 1024
    # no array buffer besides the output survives the call
    assert short_kept <= 1024 and long_kept <= 1024
