"""Intention-conditioned frequency-domain MLP motion predictor.

Data flow for a batch ``x`` of shape (B, T, C)::

    DCT over time -> channel FC (fc_in) -> + intention embedding row
      -> transpose to (B, C, T)
      -> blocks x L:  h = h + LN_C(h @ W_l + b_l)
      -> transpose back -> channel FC (fc_out) -> IDCT
      -> + last observed frame -> keep the last N rows

``LN_C`` normalises each time step over the C channels with a learned scale
and bias of length C (``ln_axis="time"`` normalises over T instead). The
classifier reuses everything up to ``fc_out``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidDimensionError, LabelError
from .numcore import Tape, dct_basis, layer_norm
from .params import Weights, xavier_uniform


@dataclass(frozen=True)
class PredictorConfig:
    T: int = 50
    N: int = 10
    C: int = 27
    blocks: int = 48
    intention_classes: int = 2
    ln_eps: float = 1e-6
    ln_axis: str = "channel"  # "channel" (per time row) or "time"
    # zero scale makes every residual block an exact identity at init
    ln_scale_init: float = 0.0
    # near-identity start: residual blocks and fc_out begin close to zero
    block_init_gain: float = 1e-8
    out_init_gain: float = 1e-8

    def __post_init__(self):
        if self.ln_axis not in ("channel", "time"):
            raise ValueError(f"ln_axis must be 'channel' or 'time', got {self.ln_axis!r}")
        for name in ("T", "N", "C", "blocks", "intention_classes"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.C % 3:
            raise ValueError("C must be 3 x number of joints")
        if self.N > self.T:
            raise ValueError("N must not exceed T")

    def to_mapping(self):
        return asdict(self)


def backbone_specs(cfg):
    specs = [("fc_in.weight", (cfg.C, cfg.C)), ("fc_in.bias", (cfg.C,))]
    ln = cfg.C if cfg.ln_axis == "channel" else cfg.T
    for l in range(cfg.blocks):
        specs += [
            (f"blocks.{l:02d}.fc.weight", (cfg.T, cfg.T)),
            (f"blocks.{l:02d}.fc.bias", (cfg.T,)),
            (f"blocks.{l:02d}.ln.scale", (ln,)),
            (f"blocks.{l:02d}.ln.bias", (ln,)),
        ]
    specs += [("fc_out.weight", (cfg.C, cfg.C)), ("fc_out.bias", (cfg.C,))]
    return specs


def predictor_specs(cfg):
    return [("embedding", (cfg.intention_classes, cfg.C))] + backbone_specs(cfg)


def init_backbone(w, cfg, rng):
    C, T = cfg.C, cfg.T
    w["fc_in.weight"] = xavier_uniform(rng, C, C, (C, C))
    for l in range(cfg.blocks):
        w[f"blocks.{l:02d}.fc.weight"] = xavier_uniform(rng, T, T, (T, T), cfg.block_init_gain)
        w[f"blocks.{l:02d}.ln.scale"] = cfg.ln_scale_init
    w["fc_out.weight"] = xavier_uniform(rng, C, C, (C, C), cfg.out_init_gain)


def init_weights(config=None, seed=0):
    """Xavier-uniform FC weights, zero biases, LN scale ``ln_scale_init``, small embedding."""
    cfg = config or PredictorConfig()
    rng = np.random.default_rng(seed)
    w = Weights("predictor", cfg, predictor_specs(cfg))
    w["embedding"] = rng.uniform(-0.1, 0.1, size=(cfg.intention_classes, cfg.C))
    init_backbone(w, cfg, rng)
    return w


def bind(tape, weights):
    """Register every tensor of ``weights`` as a parameter leaf on ``tape``."""
    return {name: tape.param(name, arr) for name, arr in weights.items()}


def check_input(x, cfg):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (2, 3) or x.shape[-2:] != (cfg.T, cfg.C):
        raise InvalidDimensionError(f"expected input (..., {cfg.T}, {cfg.C}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidDimensionError("input contains non-finite values")
    return x


def check_labels(labels, classes, batch):
    labels = np.asarray(labels)
    if labels.ndim == 0:
        labels = np.full(batch, labels)
    if labels.shape != (batch,):
        raise LabelError(f"expected {batch} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(labels == np.round(labels)):
            raise LabelError(f"labels must be integers, got {labels}")
        labels = labels.astype(np.int64)
    if np.any(labels < 0) or np.any(labels >= classes):
        raise LabelError(f"labels must lie in [0, {classes}), got {labels}")
    return labels.astype(np.int64)


def blocks_graph(tape, p, x, cfg, fuse=None):
    """Run DCT -> fc_in -> (fuse) -> blocks; returns the (B, C, T) block output."""
    basis = dct_basis(cfg.T)
    xd = tape.const(basis.forward) @ x
    z = xd @ p["fc_in.weight"] + p["fc_in.bias"]
    if fuse is not None:
        z = z + fuse
    h = z.T
    axis = -2 if cfg.ln_axis == "channel" else -1
    for l in range(cfg.blocks):
        pre = f"blocks.{l:02d}"
        y = h @ p[f"{pre}.fc.weight"] + p[f"{pre}.fc.bias"]
        h = h + layer_norm(y, p[f"{pre}.ln.scale"], p[f"{pre}.ln.bias"], axis=axis, eps=cfg.ln_eps)
    return h


def output_fc_graph(p, h):
    """Transpose the block output back to (B, T, C) and apply fc_out."""
    return h.T @ p["fc_out.weight"] + p["fc_out.bias"]


def backbone_graph(tape, p, x, cfg, fuse=None):
    """Blocks followed by fc_out; returns (B, T, C) frequency-domain features."""
    return output_fc_graph(p, blocks_graph(tape, p, x, cfg, fuse))


def decode_graph(tape, feats, x, cfg):
    """IDCT the features, add back the last observed frame, keep the last N rows."""
    basis = dct_basis(cfg.T)
    y = tape.const(basis.inverse) @ feats
    y = y + x[:, -1:, :]
    return y[:, cfg.T - cfg.N:, :]


def predictor_graph(tape, p, x, labels, cfg):
    """Differentiable forward on a batch. ``x`` is a (B, T, C) Var."""
    emb = p["embedding"][labels].reshape(len(labels), 1, cfg.C)
    feats = backbone_graph(tape, p, x, cfg, fuse=emb)
    return decode_graph(tape, feats, x, cfg)


def forward(weights, x, intention):
    """Predict the next N frames for one window (T, C) or a batch (B, T, C)."""
    cfg = weights.config
    x = check_input(x, cfg)
    single = x.ndim == 2
    xb = x[None] if single else x
    labels = check_labels(intention, cfg.intention_classes, xb.shape[0])
    tape = Tape(record=False)
    p = {name: tape.param(name, arr) for name, arr in weights.items()}
    out = predictor_graph(tape, p, tape.const(xb), labels, cfg).value
    return out[0] if single else out


def audit(weights):
    """Per-component parameter counts as ``[(component, count), ...]``."""
    groups = {}
    for name, arr in weights.items():
        parts = name.split(".")
        key = f"blocks.*.{parts[2]}" if parts[0] == "blocks" else ".".join(parts[:-1]) or name
        if parts[0] == "embedding":
            key = "embedding"
        groups[key] = groups.get(key, 0) + arr.size
    return list(groups.items())


def count_parameters(weights):
    return int(weights.flat.size)


def format_audit(weights, reference=None):
    rows = audit(weights)
    total = count_parameters(weights)
    width = max(len(k) for k, _ in rows + [("total", 0)])
    lines = [f"{'component':<{width}}  {'params':>9}"]
    lines += [f"{k:<{width}}  {v:>9,d}" for k, v in rows]
    lines.append(f"{'total':<{width}}  {total:>9,d}")
    if reference:
        lines.append(f"{'reference':<{width}}  {reference:>9,d}  "
                     f"({100.0 * (total - reference) / reference:+.3f}%)")
    return "\n".join(lines)
