"""Autoregressive deployment: rolling windows and classify-then-predict."""
from __future__ import annotations

import math

import numpy as np

from .classifier import classify_forward, predict_intention, vote_mode
from .predictor import check_input, forward

VOTE_BLOCKS = 3


def rollout(weights, seed_window, intention, horizon):
    """Predict ``horizon`` frames by chaining N-frame blocks.

    The T-frame window is shifted in place after each block, so memory use
    does not grow with the number of blocks beyond the output array.
    """
    if int(horizon) < 1:
        raise ValueError("horizon must be >= 1")
    cfg = weights.config
    window = check_input(seed_window, cfg).copy()
    n_blocks = math.ceil(horizon / cfg.N)
    out = np.empty(window.shape[:-2] + (n_blocks * cfg.N, cfg.C))
    for b in range(n_blocks):
        block = forward(weights, window, intention)
        out[..., b * cfg.N:(b + 1) * cfg.N, :] = block
        _shift(window, block)
    return out[..., :horizon, :]


def _shift(window, block):
    n = block.shape[-2]
    window[..., :-n, :] = window[..., n:, :]
    window[..., -n:, :] = block


def block_labels(classifier, seed_window, per_block=True, blocks=VOTE_BLOCKS):
    """Classifier labels for the seed window and each extended window.

    ``classifier`` is classifier :class:`~intentmotion.params.Weights` or any
    callable ``window -> (logits, motion)``. Windows are extended with the
    classifier's own motion prediction, the only causal choice at run time.
    With ``per_block=False`` the seed label is repeated.
    """
    run = classifier if callable(classifier) else (lambda w: classify_forward(classifier, w))
    window = np.array(seed_window, dtype=np.float64, copy=True)
    labels = []
    for b in range(blocks):
        logits, motion = run(window)
        labels.append(int(predict_intention(logits)))
        if not per_block:
            return labels * blocks
        if b + 1 < blocks:
            _shift(window, np.asarray(motion))
    return labels


def classify_then_predict(classifier, predictor, seed_window, horizon, per_block=True):
    """Vote an intention over three blocks, then roll the predictor out under it.

    Returns ``(motion, voted label, per-block labels)``.
    """
    labels = block_labels(classifier, seed_window, per_block)
    label = vote_mode(labels)
    return rollout(predictor, seed_window, label, horizon), label, labels
