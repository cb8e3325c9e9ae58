"""Handover loss suite for the predictor.

Every term works on a batch: ``pred``/``gt`` are (B, N, C) (a single (N, C)
window is treated as B = 1), each term is computed per sample and then
averaged over the batch. Inputs may be numpy arrays, in which case a float is
returned, or :class:`~intentmotion.numcore.Var` nodes, in which case the
result is a differentiable scalar Var on the same tape.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .dataio import LAYOUT
from .errors import InvalidDimensionError, LabelError
from .numcore import Tape, Var, norm

W_R = 0.05
W_B = 0.95


@dataclass
class LossBreakdown:
    re: float = 0.0
    v: float = 0.0
    c: float = 0.0
    r: float = 0.0
    b: float = 0.0
    rer: float = 0.0
    vr: float = 0.0
    total: float = 0.0

    def as_dict(self):
        return asdict(self)


def _lift(*items):
    """Return (tape, vars, is_graph) for a mix of Vars and arrays."""
    tape = next((x.tape for x in items if isinstance(x, Var)), None)
    graph = tape is not None
    if tape is None:
        tape = Tape(record=False)
    out = []
    for x in items:
        if not isinstance(x, Var):
            x = tape.const(np.asarray(x, dtype=np.float64))
        out.append(x)
    return tape, out, graph


def _batch3(x):
    if x.ndim == 2:
        return x.reshape(1, *x.shape)
    if x.ndim != 3:
        raise InvalidDimensionError(f"expected (N, C) or (B, N, C), got {x.shape}")
    return x


def _pair(pred, gt):
    tape, (pred, gt), graph = _lift(pred, gt)
    pred, gt = _batch3(pred), _batch3(gt)
    if pred.shape != gt.shape:
        raise InvalidDimensionError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    return tape, pred, gt, graph


def _out(x, graph):
    return x if graph else float(x.value)


def _velocity(x):
    if x.shape[1] < 2:
        raise InvalidDimensionError("velocity needs at least 2 frames")
    return x[:, 1:, :] - x[:, :-1, :]


def _rh(x, layout):
    return x[:, :, layout.right_hand_slice]


def per_sample_re(pred, gt):
    return (pred - gt).square().sum(axis=(1, 2))


def per_sample_v(pred, gt):
    return (_velocity(pred) - _velocity(gt)).square().sum(axis=(1, 2))


def per_sample_r(pred, ree, layout=LAYOUT):
    last = pred[:, -1, layout.right_hand_slice]
    return (last - ree).square().sum(axis=1)


def _mean_hand_distance(x, layout):
    B, N, C = x.shape
    joints = x.reshape(B, N, C // 3, 3)
    rh = layout.right_hand
    others = np.array([k for k in range(C // 3) if k != rh])
    hand = joints[:, :, rh:rh + 1, :]
    rest = joints[:, :, others, :]
    return norm(hand - rest).mean(axis=2)


def per_sample_b(pred, gt, layout=LAYOUT):
    diff = _mean_hand_distance(pred, layout) - _mean_hand_distance(gt, layout)
    return diff.square().sum(axis=1)


def per_sample_rer(pred, gt, layout=LAYOUT):
    return per_sample_re(_rh(pred, layout), _rh(gt, layout))


def per_sample_vr(pred, gt, layout=LAYOUT):
    return per_sample_v(_rh(pred, layout), _rh(gt, layout))


def loss_re(pred, gt):
    """Squared Frobenius distance between predicted and true windows."""
    tape, pred, gt, graph = _pair(pred, gt)
    return _out(per_sample_re(pred, gt).mean(), graph)


def loss_v(pred, gt):
    """Squared distance between first-difference (velocity) sequences."""
    tape, pred, gt, graph = _pair(pred, gt)
    return _out(per_sample_v(pred, gt).mean(), graph)


def _ree(tape, ree, batch):
    if not isinstance(ree, Var):
        ree = tape.const(np.asarray(ree, dtype=np.float64))
    if ree.ndim == 1:
        ree = ree.reshape(1, 3)
    if ree.shape[-1] != 3 or ree.shape[0] not in (1, batch):
        raise InvalidDimensionError(f"ree must be (3,) or (B, 3), got {ree.shape}")
    return ree


def loss_r(pred, ree_final, layout=LAYOUT):
    """Squared distance from the last predicted right hand to the end effector."""
    tape, (pred,), graph = _lift(pred)
    pred = _batch3(pred)
    ree = _ree(tape, ree_final, pred.shape[0])
    return _out(per_sample_r(pred, ree, layout).mean(), graph)


def loss_b(pred, gt, layout=LAYOUT):
    """Per-frame discrepancy of the mean hand-to-joint distance, squared and summed."""
    tape, pred, gt, graph = _pair(pred, gt)
    return _out(per_sample_b(pred, gt, layout).mean(), graph)


def loss_rer(pred, gt, layout=LAYOUT):
    tape, pred, gt, graph = _pair(pred, gt)
    return _out(per_sample_rer(pred, gt, layout).mean(), graph)


def loss_vr(pred, gt, layout=LAYOUT):
    tape, pred, gt, graph = _pair(pred, gt)
    return _out(per_sample_vr(pred, gt, layout).mean(), graph)


def _labels(intention, batch):
    labels = np.asarray(intention)
    if labels.ndim == 0:
        labels = np.full(batch, labels)
    if labels.shape != (batch,) or not np.all(np.isin(labels, (0, 1))):
        raise LabelError(f"intention must be 0/1 per sample, got {intention!r}")
    return labels.astype(np.int64)


def combine_collaborative(r, b, intention, w_r=W_R, w_b=W_B):
    """``w_r * r + w_b * b`` for collaborative (0) samples, exactly 0 otherwise."""
    return 0.0 if int(intention) == 1 else w_r * r + w_b * b


def loss_c(pred, gt, ree_final, intention, layout=LAYOUT, w_r=W_R, w_b=W_B):
    tape, pred, gt, graph = _pair(pred, gt)
    ree = _ree(tape, ree_final, pred.shape[0])
    mask = (_labels(intention, pred.shape[0]) == 0).astype(np.float64)
    per = w_r * per_sample_r(pred, ree, layout) + w_b * per_sample_b(pred, gt, layout)
    return _out((per * mask).mean(), graph)


def loss_h_graph(pred, gt, ree_final, intention, layout=LAYOUT, w_r=W_R, w_b=W_B):
    """Return ``(total, LossBreakdown)``; ``total`` is a Var when inputs are Vars."""
    tape, pred, gt, graph = _pair(pred, gt)
    B = pred.shape[0]
    ree = _ree(tape, ree_final, B)
    mask = (_labels(intention, B) == 0).astype(np.float64)
    re = per_sample_re(pred, gt).mean()
    v = per_sample_v(pred, gt).mean()
    r_per = per_sample_r(pred, ree, layout)
    b_per = per_sample_b(pred, gt, layout)
    c = ((w_r * r_per + w_b * b_per) * mask).mean()
    rer = per_sample_rer(pred, gt, layout).mean()
    vr = per_sample_vr(pred, gt, layout).mean()
    total = re + v + c + rer + vr
    parts = dict(re=re, v=v, c=c, r=r_per.mean(), b=b_per.mean(), rer=rer, vr=vr, total=total)
    breakdown = LossBreakdown(**{k: float(x.value) for k, x in parts.items()})
    return (total if graph else float(total.value)), breakdown


def loss_h(pred, gt, ree_final, intention, layout=LAYOUT, w_r=W_R, w_b=W_B):
    """Combined handover objective with per-term reporting."""
    return loss_h_graph(pred, gt, ree_final, intention, layout, w_r, w_b)[1]
