"""Motion and intention metrics, leave-one-out orchestration, latency benchmark."""
from __future__ import annotations

import json
import os
import platform
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .classifier import classify_forward, predict_intention
from .dataio import LAYOUT, leave_one_out, select
from .errors import InvalidDimensionError
from .predictor import count_parameters, forward

THRESHOLDS = (0.20, 0.30, 0.35, 0.40)
REPORT_SCHEMA = "intentmotion-eval"
REPORT_VERSION = 1


def _pair(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise InvalidDimensionError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    if pred.shape[-1] % 3:
        raise InvalidDimensionError("last axis must hold xyz triples")
    return pred, gt


def joint_errors(pred, gt):
    """Euclidean error per joint, shape ``pred.shape[:-1] + (K,)``."""
    pred, gt = _pair(pred, gt)
    d = (pred - gt).reshape(*pred.shape[:-1], pred.shape[-1] // 3, 3)
    return np.sqrt(np.sum(d * d, axis=-1))


def frame_errors(pred, gt):
    """Mean joint error of every frame, flattened over any batch axes."""
    return joint_errors(pred, gt).mean(axis=-1).reshape(-1)


def body_l2(pred, gt):
    """Mean over frames and joints of the per-joint 3D distance (meters)."""
    return float(joint_errors(pred, gt).mean())


def pct_below(pred, gt, threshold):
    """Percentage of frames whose mean joint error is <= ``threshold``."""
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    return float(100.0 * np.mean(frame_errors(pred, gt) <= threshold))


def right_hand_l2(pred, gt, layout=LAYOUT):
    pred, gt = _pair(pred, gt)
    sl = layout.right_hand_slice
    d = pred[..., sl] - gt[..., sl]
    return float(np.sqrt(np.sum(d * d, axis=-1)).mean())


def macro_f1(predicted, true, classes=(0, 1)):
    """Unweighted mean of per-class F1.

    A class absent from both predictions and truth scores 0 and triggers a
    warning.
    """
    p = np.asarray(predicted)
    t = np.asarray(true)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    scores = []
    for c in classes:
        tp = np.sum((p == c) & (t == c))
        fp = np.sum((p == c) & (t != c))
        fn = np.sum((p != c) & (t == c))
        if tp + fp + fn == 0:
            warnings.warn(f"class {c} absent from predictions and truth; its F1 counts as 0")
            scores.append(0.0)
        else:
            scores.append(2.0 * tp / (2.0 * tp + fp + fn))
    return float(np.mean(scores))


def accuracy(predicted, true):
    p, t = np.asarray(predicted), np.asarray(true)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    return float(np.mean(p == t)) if p.size else 0.0


# --------------------------------------------------------------------------- reports

@dataclass
class LatencyStats:
    mean_ms: float
    std_ms: float
    min_ms: float
    max_ms: float
    runs: int
    warmup: int
    environment: dict = field(default_factory=dict)


@dataclass
class EvalReport:
    subject: str = "all"
    n_samples: int = 0
    body_l2: float | None = None
    pct_below: dict | None = None  # {"0.20": pct, ...}
    right_hand_l2: float | None = None
    macro_f1: float | None = None
    accuracy: float | None = None
    latency: LatencyStats | None = None
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pct_below:
            vals = [self.pct_below[k] for k in sorted(self.pct_below, key=float)]
            if any(not 0.0 <= v <= 100.0 for v in vals) or any(a > b for a, b in zip(vals, vals[1:])):
                raise ValueError(f"threshold percentages out of order: {self.pct_below}")
        if self.macro_f1 is not None and not 0.0 <= self.macro_f1 <= 1.0:
            raise ValueError("macro_f1 outside [0, 1]")

    def to_dict(self):
        return asdict(self)

    CSV_FIELDS = ("subject", "n_samples", "body_l2", "pct_0.20", "pct_0.30", "pct_0.35",
                  "pct_0.40", "right_hand_l2", "macro_f1", "accuracy")

    def csv_row(self):
        pct = self.pct_below or {}
        vals = [self.subject, self.n_samples, self.body_l2,
                *(pct.get(f"{t:.2f}") for t in THRESHOLDS),
                self.right_hand_l2, self.macro_f1, self.accuracy]
        return ",".join("" if v is None else (repr(v) if isinstance(v, float) else str(v))
                        for v in vals)


def motion_report(preds, gts):
    return dict(
        body_l2=body_l2(preds, gts),
        pct_below={f"{t:.2f}": pct_below(preds, gts, t) for t in THRESHOLDS},
        right_hand_l2=right_hand_l2(preds, gts),
    )


def voted_labels(classifier, X, per_block=True, blocks=3):
    """Mode of the classifier's labels over the seed window and its two extensions (batched)."""
    window = np.array(X, dtype=np.float64, copy=True)
    votes = []
    for b in range(blocks):
        logits, motion = classify_forward(classifier, window)
        votes.append(np.atleast_1d(predict_intention(logits)))
        if not per_block:
            votes = votes * blocks
            break
        n = motion.shape[-2]
        window[:, :-n] = window[:, n:]
        window[:, -n:] = motion
    votes = np.stack(votes, axis=1)
    return (votes.sum(axis=1) * 2 > blocks).astype(np.int64)


def evaluate_samples(samples, predictor=None, classifier=None, intention_source="true",
                     per_block=True, subject="all"):
    """Build an :class:`EvalReport` for ``samples`` with whichever models are given."""
    X = np.stack([s.input for s in samples])
    G = np.stack([s.target for s in samples])
    y = np.array([s.intention for s in samples], dtype=np.int64)
    report = EvalReport(subject=subject, n_samples=len(samples))
    guessed = None
    if classifier is not None:
        guessed = voted_labels(classifier, X, per_block)
        report.macro_f1 = macro_f1(guessed, y)
        report.accuracy = accuracy(guessed, y)
        report.parameters["classifier"] = count_parameters(classifier)
    if predictor is not None:
        if intention_source == "classifier":
            if guessed is None:
                raise ValueError("intention_source='classifier' needs a classifier")
            labels = guessed
        elif intention_source == "true":
            labels = y
        else:
            raise ValueError(f"unknown intention_source {intention_source!r}")
        preds = forward(predictor, X, labels)
        for k, v in motion_report(preds, G).items():
            setattr(report, k, v)
        report.parameters["predictor"] = count_parameters(predictor)
    report.__post_init__()
    return report


def aggregate(reports):
    """Unweighted mean of every metric over per-split reports."""
    def mean_of(getter):
        vals = [getter(r) for r in reports]
        vals = [v for v in vals if v is not None]
        return float(np.mean(vals)) if vals else None

    pct = None
    if any(r.pct_below for r in reports):
        keys = reports[0].pct_below.keys()
        pct = {k: mean_of(lambda r, k=k: r.pct_below and r.pct_below[k]) for k in keys}
    return EvalReport(
        subject="mean", n_samples=sum(r.n_samples for r in reports),
        body_l2=mean_of(lambda r: r.body_l2), pct_below=pct,
        right_hand_l2=mean_of(lambda r: r.right_hand_l2),
        macro_f1=mean_of(lambda r: r.macro_f1), accuracy=mean_of(lambda r: r.accuracy),
        parameters=dict(reports[0].parameters) if reports else {},
    )


@dataclass
class LooResult:
    splits: list
    aggregate: EvalReport

    def to_dict(self):
        return {"schema": REPORT_SCHEMA, "version": REPORT_VERSION, "mode": "loo",
                "splits": [r.to_dict() for r in self.splits],
                "aggregate": self.aggregate.to_dict()}


def run_leave_one_out(samples, train_config, kinds=("predictor", "classifier"),
                      predictor_config=None, classifier_config=None, intention_source="true",
                      per_block=True, progress=None):
    """Train and evaluate once per held-out subject; aggregate by unweighted mean."""
    from .trainer import train  # local import keeps evaluator light for metric-only use

    reports = []
    for split in leave_one_out(samples):
        train_set = select(samples, split.train_ids)
        test_set = select(samples, split.test_ids)
        pw = cw = None
        if "predictor" in kinds:
            pw, _ = train(train_set, "predictor", train_config, predictor_config)
        if "classifier" in kinds:
            cw, _ = train(train_set, "classifier", train_config, classifier_config)
        rep = evaluate_samples(test_set, pw, cw, intention_source, per_block, split.held_out)
        reports.append(rep)
        if progress:
            progress(split, rep)
    return LooResult(reports, aggregate(reports))


def report_document(report, mode="single"):
    if isinstance(report, LooResult):
        return report.to_dict()
    return {"schema": REPORT_SCHEMA, "version": REPORT_VERSION, "mode": mode,
            "report": report.to_dict()}


def write_report(report, path, mode="single"):
    with open(path, "w") as fh:
        json.dump(report_document(report, mode), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(reports, path):
    with open(path, "w") as fh:
        fh.write(",".join(EvalReport.CSV_FIELDS) + "\n")
        for r in reports:
            fh.write(r.csv_row() + "\n")


def validate_report(doc):
    """Check a report document against the documented layout; raises ValueError."""
    if doc.get("schema") != REPORT_SCHEMA or doc.get("version") != REPORT_VERSION:
        raise ValueError("not an evaluation report")
    required = set(EvalReport.__dataclass_fields__)
    if doc.get("mode") == "loo":
        reports = doc["splits"] + [doc["aggregate"]]
    elif doc.get("mode") == "single":
        reports = [doc["report"]]
    else:
        raise ValueError(f"unknown mode {doc.get('mode')!r}")
    for r in reports:
        missing = required - set(r)
        if missing:
            raise ValueError(f"report lacks fields {sorted(missing)}")
    return True


def summary_table(reports):
    """Plain-text table in the layout of the accuracy tables."""
    head = (f"{'subject':<8} {'body L2':>8} {'<=0.20':>7} {'<=0.30':>7} {'<=0.35':>7} "
            f"{'<=0.40':>7} {'RH L2':>7} {'F1':>6} {'acc%':>6}")
    lines = [head, "-" * len(head)]

    def fmt(v, pattern):
        return format(v, pattern) if v is not None else "-"

    for r in reports:
        pct = r.pct_below or {}
        lines.append(
            f"{r.subject:<8} {fmt(r.body_l2, '8.3f'):>8} "
            + " ".join(f"{fmt(pct.get(f'{t:.2f}'), '7.2f'):>7}" for t in THRESHOLDS)
            + f" {fmt(r.right_hand_l2, '7.3f'):>7} {fmt(r.macro_f1, '6.3f'):>6} "
            + f"{fmt(None if r.accuracy is None else 100 * r.accuracy, '6.2f'):>6}"
        )
    return "\n".join(lines)


# --------------------------------------------------------------------------- latency

def environment_descriptor(pinned=None):
    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "processor": platform.processor() or "unknown",
        "cpu_count": os.cpu_count(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "pinned_cpu": pinned,
        "threads": 1,
    }


def bench_inference(weights, sample_input, runs=100, warmup=10, intention=0):
    """Single-threaded wall-clock latency of one forward call, in milliseconds.

    ``warmup`` calls are made first and discarded. BLAS is limited to one
    thread and the process is pinned to one core where the OS allows; the
    previous affinity is restored afterwards. Weights are checksummed before
    and after to guarantee the benchmark is read-only.
    """
    from threadpoolctl import threadpool_limits

    if int(runs) < 1:
        raise ValueError("runs must be >= 1")
    x = np.asarray(sample_input, dtype=np.float64)
    if weights.kind == "predictor":
        call = lambda: forward(weights, x, intention)  # noqa: E731
    else:
        call = lambda: classify_forward(weights, x)  # noqa: E731
    before = weights.checksum()

    pinned, old_affinity = None, None
    if hasattr(os, "sched_getaffinity"):
        try:
            old_affinity = os.sched_getaffinity(0)
            pinned = min(old_affinity)
            os.sched_setaffinity(0, {pinned})
        except OSError:
            pinned = None
    times = []
    try:
        with threadpool_limits(limits=1):
            for _ in range(warmup):
                call()
            for _ in range(runs):
                t0 = time.perf_counter()
                call()
                times.append((time.perf_counter() - t0) * 1e3)
    finally:
        if old_affinity is not None and pinned is not None:
            os.sched_setaffinity(0, old_affinity)
    if weights.checksum() != before:
        raise RuntimeError("benchmark mutated the weights")
    t = np.array(times)
    return LatencyStats(float(t.mean()), float(t.std()), float(t.min()), float(t.max()),
                        int(runs), int(warmup), environment_descriptor(pinned))
