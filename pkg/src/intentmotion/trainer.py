"""Adam + cosine-annealed training loop for predictor and classifier."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, fields

import numpy as np

from .checkpoint import read_checkpoint, save_checkpoint
from .classifier import ClassifierConfig, classifier_graph, init_classifier, loss_class_graph
from .dataio import augment_reverse, augment_shift
from .errors import ConfigError, NumericError
from .losses import loss_h_graph, per_sample_re, per_sample_v
from .numcore import Tape
from .predictor import PredictorConfig, bind, init_weights, predictor_graph

KINDS = ("predictor", "classifier")
SUITES = ("h", "re_v")


@dataclass
class TrainConfig:
    epochs: int = 5000
    batch_size: int = 256
    lr_max: float = 1e-2
    lr_min: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    augment_prob: float = 0.5
    shift_prob: float = 0.0  # window-shift augmentation, see dataio.augment_shift
    loss_suite: str = "h"  # predictor only: "h" full suite, "re_v" reconstruction + velocity
    checkpoint_every: int = 0
    max_grad_norm: float | None = None  # diagnostics only
    schema_version: int = 1

    def __post_init__(self):
        if not self.lr_max > self.lr_min > 0:
            raise ConfigError("need lr_max > lr_min > 0", field="lr_max")
        if int(self.epochs) < 1:
            raise ConfigError("epochs must be >= 1", field="epochs")
        if int(self.batch_size) < 1:
            raise ConfigError("batch_size must be >= 1", field="batch_size")
        if not 0.0 <= self.augment_prob <= 1.0:
            raise ConfigError("augment_prob must lie in [0, 1]", field="augment_prob")
        if not 0.0 <= self.shift_prob <= 1.0:
            raise ConfigError("shift_prob must lie in [0, 1]", field="shift_prob")
        if self.loss_suite not in SUITES:
            raise ConfigError(f"unknown loss_suite {self.loss_suite!r}", field="loss_suite")
        if self.schema_version != 1:
            raise ConfigError(f"unsupported schema_version {self.schema_version}",
                              field="schema_version")

    @classmethod
    def from_mapping(cls, mapping):
        known = {f.name for f in fields(cls)}
        for key in mapping:
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}", field=key)
        return cls(**mapping)

    def to_mapping(self):
        return asdict(self)


def cosine_lr(epoch, config):
    """Per-epoch cosine annealing from ``lr_max`` (epoch 0) to ``lr_min`` (last epoch)."""
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {config.epochs})")
    if config.epochs == 1:
        return config.lr_max
    if epoch == config.epochs - 1:
        return config.lr_min
    frac = epoch / (config.epochs - 1)
    return config.lr_min + 0.5 * (config.lr_max - config.lr_min) * (1.0 + math.cos(math.pi * frac))


class AdamState:
    """First/second moments over the flat parameter vector."""

    def __init__(self, size, m=None, v=None, step=0):
        self.m = np.zeros(size) if m is None else np.asarray(m, dtype=np.float64).copy()
        self.v = np.zeros(size) if v is None else np.asarray(v, dtype=np.float64).copy()
        self.step = int(step)


def flatten_grads(weights, grads):
    return np.concatenate([np.asarray(grads[name]).reshape(-1) for name in weights.names()])


def adam_step(weights, grads, state, lr, config):
    """Bias-corrected Adam update applied in place; returns ``(weights, state)``."""
    g = grads if isinstance(grads, np.ndarray) else flatten_grads(weights, grads)
    if g.shape != weights.flat.shape:
        raise ValueError(f"gradient has {g.size} entries, weights have {weights.flat.size}")
    if not np.all(np.isfinite(g)):
        bad = [n for n in weights.names() if not np.all(np.isfinite(_view(weights, g, n)))]
        raise NumericError(f"non-finite gradient in {bad[0]}", tensor=bad[0])
    state.step += 1
    b1, b2 = config.beta1, config.beta2
    state.m *= b1
    state.m += (1.0 - b1) * g
    state.v *= b2
    state.v += (1.0 - b2) * g * g
    mhat = state.m / (1.0 - b1 ** state.step)
    vhat = state.v / (1.0 - b2 ** state.step)
    weights.flat -= lr * mhat / (np.sqrt(vhat) + config.eps)
    return weights, state


def _view(weights, flat, name):
    offset = 0
    for n, shape in weights.specs.items():
        size = int(np.prod(shape))
        if n == name:
            return flat[offset:offset + size]
        offset += size
    raise KeyError(name)


def _batch_arrays(samples):
    X = np.stack([s.input for s in samples])
    G = np.stack([s.target for s in samples])
    ree = np.stack([s.ree_final for s in samples])
    labels = np.array([s.intention for s in samples], dtype=np.int64)
    return X, G, ree, labels


def batch_loss(tape, p, kind, samples, cfg, loss_suite="h"):
    """Build the loss graph of one batch; returns ``(total Var, term dict)``."""
    X, G, ree, labels = _batch_arrays(samples)
    x, gt = tape.const(X), tape.const(G)
    if kind == "predictor":
        pred = predictor_graph(tape, p, x, labels, cfg)
        if loss_suite == "re_v":
            re, v = per_sample_re(pred, gt).mean(), per_sample_v(pred, gt).mean()
            total = re + v
            return total, {"re": float(re.value), "v": float(v.value), "total": float(total.value)}
        total, br = loss_h_graph(pred, gt, ree, labels)
        return total, br.as_dict()
    logits, motion = classifier_graph(tape, p, x, cfg)
    return loss_class_graph(logits, motion, gt, labels)


def new_weights(kind, model_config, seed):
    if kind == "predictor":
        return init_weights(model_config or PredictorConfig(), seed)
    if kind == "classifier":
        return init_classifier(model_config or ClassifierConfig(), seed)
    raise ConfigError(f"unknown model kind {kind!r}", field="kind")


def train(samples, kind="predictor", config=None, model_config=None, log_path=None,
          checkpoint_path=None, resume_from=None, progress=None):
    """Train a fresh (or resumed) model; returns ``(weights, log records)``.

    Shuffling, augmentation draws and initialisation derive from
    ``config.seed`` and the epoch index only, so a resumed run replays the
    same stream as an uninterrupted one.
    """
    cfg = config or TrainConfig()
    if not samples:
        raise ValueError("training set is empty")
    if kind not in KINDS:
        raise ConfigError(f"unknown model kind {kind!r}", field="kind")

    start_epoch = 0
    if resume_from is not None:
        weights, extra, meta = read_checkpoint(resume_from, kind=kind)
        state = AdamState(weights.flat.size, extra.get("adam.m"), extra.get("adam.v"),
                          meta.get("step", 0))
        start_epoch = int(meta.get("epochs_done", 0))
    else:
        weights = new_weights(kind, model_config, cfg.seed)
        state = AdamState(weights.flat.size)
    mcfg = weights.config

    log = []
    log_fh = open(log_path, "a" if resume_from else "w") if log_path else None
    n = len(samples)
    t0 = time.perf_counter()
    try:
        for epoch in range(start_epoch, cfg.epochs):
            lr = cosine_lr(epoch, cfg)
            order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                batch = [_augment(samples[i], cfg, epoch, int(i)) for i in idx]
                tape = Tape()
                p = bind(tape, weights)
                total, terms = batch_loss(tape, p, kind, batch, mcfg, cfg.loss_suite)
                g = flatten_grads(weights, tape.grad(total))
                if cfg.max_grad_norm is not None:
                    gn = float(np.linalg.norm(g))
                    if gn > cfg.max_grad_norm:
                        g *= cfg.max_grad_norm / gn
                adam_step(weights, g, state, lr, cfg)
                if not weights.all_finite():
                    raise NumericError(f"non-finite weights after step {state.step}")
                rec = {"epoch": epoch, "step": state.step, "lr": lr, **terms,
                       "wall_time": time.perf_counter() - t0}
                log.append(rec)
                if log_fh:
                    log_fh.write(json.dumps(rec) + "\n")
            if progress:
                progress(epoch, log[-1])
            done = epoch + 1
            if checkpoint_path and cfg.checkpoint_every and done % cfg.checkpoint_every == 0 \
                    and done < cfg.epochs:
                _save(weights, state, f"{checkpoint_path}.epoch{done}", cfg, done, kind)
    finally:
        if log_fh:
            log_fh.close()
    if checkpoint_path:
        _save(weights, state, checkpoint_path, cfg, cfg.epochs, kind)
    return weights, log


def _augment(sample, cfg, epoch, i):
    if cfg.shift_prob > 0:
        sample = augment_shift(sample, [cfg.seed, epoch, i, 11], cfg.shift_prob)
    if cfg.augment_prob > 0:
        sample = augment_reverse(sample, [cfg.seed, epoch, i, 7], cfg.augment_prob)
    return sample


def _save(weights, state, path, cfg, epochs_done, kind):
    save_checkpoint(
        weights, path,
        extra={"adam.m": state.m, "adam.v": state.v},
        meta={"epochs_done": epochs_done, "step": state.step, "kind": kind,
              "train_config": cfg.to_mapping()},
    )
