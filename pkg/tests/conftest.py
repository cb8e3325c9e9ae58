import numpy as np
import pytest

from intentmotion.classifier import ClassifierConfig, init_classifier
from intentmotion.numcore import Tape, finite_difference_check
from intentmotion.predictor import PredictorConfig, init_weights


def randomize(weights, seed=0, scale=0.3):
    """Overwrite every tensor with O(1) random values (a generic, non-degenerate point)."""
    rng = np.random.default_rng(seed)
    for name, arr in weights.items():
        if name.endswith("ln.scale"):
            arr[...] = 1.0 + scale * rng.normal(size=arr.shape)
        else:
            arr[...] = scale * rng.normal(size=arr.shape) / np.sqrt(max(arr.shape[0], 1))
    return weights


def graph_gradcheck(weights, build, max_entries=None, report=None):
    """Finite-difference check of ``build(tape, params) -> scalar Var`` over all tensors."""
    tape = Tape()
    p = {name: tape.param(name, arr) for name, arr in weights.items()}
    grads = tape.grad(build(tape, p))

    def f(params):
        t = Tape(record=False)
        return float(build(t, {k: t.param(k, v) for k, v in params.items()}).value)

    return finite_difference_check(f, weights.as_dict(), grads, step=1e-5,
                                   max_entries=max_entries, report=report)


@pytest.fixture
def small_pred_cfg():
    return PredictorConfig(blocks=2)


@pytest.fixture
def small_cls_cfg():
    return ClassifierConfig(blocks=2, hidden=16)


@pytest.fixture
def random_predictor(small_pred_cfg):
    return randomize(init_weights(small_pred_cfg, seed=1), seed=2)


@pytest.fixture
def random_classifier(small_cls_cfg):
    return randomize(init_classifier(small_cls_cfg, seed=1), seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
