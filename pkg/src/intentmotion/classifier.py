"""Intention classifier: the predictor backbone without the embedding, plus a
two-layer head on temporally pooled features.

The head pools the output of the last block (the final temporal FC + LN),
before ``fc_out`` and the IDCT. The backbone also keeps its motion decoder,
which the reconstruction and velocity terms of the classification objective
need.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidDimensionError, LabelError
from .losses import per_sample_re, per_sample_v, _pair
from .numcore import Tape, Var, softmax_cross_entropy, tanh
from .params import Weights, xavier_uniform
from .predictor import (backbone_specs, blocks_graph, check_input, check_labels, decode_graph,
                        init_backbone, output_fc_graph)


@dataclass(frozen=True)
class ClassifierConfig:
    T: int = 50
    N: int = 10
    C: int = 27
    blocks: int = 48
    classes: int = 2
    # 4618 puts the total at 265,046 next to the 265,032 reference
    hidden: int = 4618
    pooling: str = "avg"  # "avg" or "flat"
    ln_eps: float = 1e-6
    ln_axis: str = "channel"  # "channel" (per time row) or "time"
    # zero scale makes every residual block an exact identity at init
    ln_scale_init: float = 0.0
    block_init_gain: float = 1e-8
    out_init_gain: float = 1e-8

    def __post_init__(self):
        if self.ln_axis not in ("channel", "time"):
            raise ValueError(f"ln_axis must be 'channel' or 'time', got {self.ln_axis!r}")
        for name in ("T", "N", "C", "blocks", "classes", "hidden"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.pooling not in ("avg", "flat"):
            raise ValueError(f"pooling must be 'avg' or 'flat', got {self.pooling!r}")

    @property
    def head_in(self):
        return self.C if self.pooling == "avg" else self.T * self.C

    def to_mapping(self):
        return asdict(self)


def classifier_specs(cfg):
    return backbone_specs(cfg) + [
        ("head.fc1.weight", (cfg.head_in, cfg.hidden)),
        ("head.fc1.bias", (cfg.hidden,)),
        ("head.fc2.weight", (cfg.hidden, cfg.classes)),
        ("head.fc2.bias", (cfg.classes,)),
    ]


def init_classifier(config=None, seed=0):
    cfg = config or ClassifierConfig()
    rng = np.random.default_rng(seed)
    w = Weights("classifier", cfg, classifier_specs(cfg))
    init_backbone(w, cfg, rng)
    w["head.fc1.weight"] = xavier_uniform(rng, cfg.head_in, cfg.hidden, (cfg.head_in, cfg.hidden))
    w["head.fc2.weight"] = xavier_uniform(rng, cfg.hidden, cfg.classes, (cfg.hidden, cfg.classes))
    return w


def pool(h, cfg):
    """Average the (B, C, T) block output over time, or flatten it."""
    if cfg.pooling == "avg":
        return h.mean(axis=2)
    return h.reshape(h.shape[0], cfg.C * cfg.T)


def head_graph(p, pooled):
    hidden = tanh(pooled @ p["head.fc1.weight"] + p["head.fc1.bias"])
    return hidden @ p["head.fc2.weight"] + p["head.fc2.bias"]


def classifier_graph(tape, p, x, cfg):
    """Return ``(logits (B, M), motion (B, N, C))`` Vars."""
    h = blocks_graph(tape, p, x, cfg)
    logits = head_graph(p, pool(h, cfg))
    return logits, decode_graph(tape, output_fc_graph(p, h), x, cfg)


def classify_forward(weights, x):
    """Logits and motion prediction for a window (T, C) or batch (B, T, C)."""
    cfg = weights.config
    x = check_input(x, cfg)
    single = x.ndim == 2
    xb = x[None] if single else x
    tape = Tape(record=False)
    p = {name: tape.param(name, arr) for name, arr in weights.items()}
    logits, motion = classifier_graph(tape, p, tape.const(xb), cfg)
    if single:
        return logits.value[0], motion.value[0]
    return logits.value, motion.value


def softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def predict_intention(logits):
    """Index of the largest logit; ties go to the lower index (collaborative)."""
    z = np.asarray(logits, dtype=np.float64)
    if z.shape[-1] < 2:
        raise InvalidDimensionError(f"need at least 2 logits, got shape {z.shape}")
    out = np.argmax(z, axis=-1)  # first maximum wins
    return int(out) if out.ndim == 0 else out


def cross_entropy(logits, label):
    """``-log softmax(logits)[label]``; batched when ``logits`` is (B, M)."""
    graph = isinstance(logits, Var)
    if not graph:
        z = np.asarray(logits, dtype=np.float64)
        single = z.ndim == 1
        tape = Tape(record=False)
        logits = tape.const(z[None] if single else z)
    elif logits.ndim == 1:
        logits = logits.reshape(1, logits.shape[0])
    labels = np.atleast_1d(np.asarray(label))
    if labels.shape != (logits.shape[0],):
        raise LabelError(f"expected {logits.shape[0]} labels, got {labels.shape}")
    labels = check_labels(labels, logits.shape[1], logits.shape[0])
    out = softmax_cross_entropy(logits, labels).mean()
    return out if graph else float(out.value)


def loss_class_graph(logits, motion, gt, labels):
    """Return ``(total, breakdown dict)`` for the joint classification objective."""
    tape, motion, gt, graph = _pair(motion, gt)
    re = per_sample_re(motion, gt).mean()
    v = per_sample_v(motion, gt).mean()
    if not isinstance(logits, Var):
        z = np.asarray(logits, dtype=np.float64)
        logits = tape.const(z[None] if z.ndim == 1 else z)
    ce = cross_entropy(logits, labels)
    total = re + v + ce
    parts = {"re": float(re.value), "v": float(v.value), "ce": float(ce.value),
             "total": float(total.value)}
    return (total if graph else parts["total"]), parts


def loss_class(logits, motion, gt, labels):
    """Reconstruction + velocity + cross-entropy, reported per term."""
    return loss_class_graph(logits, motion, gt, labels)[1]


def vote_mode(labels):
    """Majority label over exactly three block labels."""
    labels = [int(l) for l in labels]
    if len(labels) != 3:
        raise ValueError(f"mode voting needs exactly 3 labels, got {len(labels)}")
    counts = np.bincount(labels)
    return int(np.argmax(counts))
