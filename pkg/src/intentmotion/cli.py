"""Command-line entry point: generate, train, evaluate, predict, bench."""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import fields

import numpy as np

from . import dataio
from .checkpoint import load_checkpoint
from .classifier import ClassifierConfig
from .errors import ConfigError, IntentMotionError
from .evaluator import (bench_inference, evaluate_samples, run_leave_one_out, summary_table,
                        write_csv, write_report)
from .inference import classify_then_predict, rollout
from .predictor import PredictorConfig, count_parameters, format_audit
from .trainer import TrainConfig, train

REFERENCE_PARAMS = {"predictor": 126_558, "classifier": 265_032}


def _mapping(path):
    return dataio.load_config(path) if path else {}


def _model_config(kind, mapping):
    cls = PredictorConfig if kind == "predictor" else ClassifierConfig
    known = {f.name for f in fields(cls)}
    for key in mapping:
        if key not in known:
            raise ConfigError(f"unknown model config key {key!r}", field=f"model.{key}")
    return cls(**mapping)


def cmd_generate(args):
    mapping = _mapping(args.config)
    if args.seed is not None:
        mapping["seed"] = args.seed
    cfg = dataio.GeneratorConfig.from_mapping(mapping)
    samples = dataio.generate_synthetic(cfg)
    dataio.write_dataset(samples, args.out, meta={"generator": cfg.to_mapping()})
    collab = sum(s.intention == 0 for s in samples)
    print(f"wrote {len(samples)} samples ({collab} collaborative, {len(samples) - collab} "
          f"non-collaborative) from {cfg.subjects} subjects to {args.out}")
    return 0


def _train_config(args):
    mapping = _mapping(args.config)
    model = mapping.pop("model", {}) or {}
    overrides = {"epochs": args.epochs, "batch_size": args.batch_size, "seed": args.seed,
                 "lr_max": args.lr_max, "augment_prob": args.augment_prob,
                 "shift_prob": args.shift_prob,
                 "loss_suite": args.loss_suite, "checkpoint_every": args.checkpoint_every}
    mapping.update({k: v for k, v in overrides.items() if v is not None})
    return TrainConfig.from_mapping(mapping), model


def cmd_train(args):
    samples = dataio.read_dataset(args.data)
    cfg, model = _train_config(args)
    mcfg = _model_config(args.kind, model)

    def progress(epoch, rec):
        if args.verbose:
            print(f"epoch {epoch:5d} lr {rec['lr']:.2e} total {rec['total']:.6f}", file=sys.stderr)

    weights, log = train(samples, args.kind, cfg, mcfg, log_path=args.log, checkpoint_path=args.out,
                         resume_from=args.resume, progress=progress)
    steps = cfg.epochs * math.ceil(len(samples) / cfg.batch_size)
    print(f"trained {args.kind} for {cfg.epochs} epochs ({steps} steps); final total loss "
          f"{log[-1]['total']:.6g}; checkpoint {args.out}")
    return 0


def cmd_evaluate(args):
    samples = dataio.read_dataset(args.data)
    pw = load_checkpoint(args.predictor, kind="predictor") if args.predictor else None
    cw = load_checkpoint(args.classifier, kind="classifier") if args.classifier else None
    if pw is None and cw is None:
        raise ConfigError("evaluate needs --predictor and/or --classifier", field="checkpoints")
    if args.mode == "single":
        report = evaluate_samples(samples, pw, cw, args.intention_source, not args.once)
        reports = [report]
    else:
        cfg, _ = _train_config(args)
        kinds = tuple(k for k, w in (("predictor", pw), ("classifier", cw)) if w is not None)
        report = run_leave_one_out(
            samples, cfg, kinds,
            predictor_config=pw.config if pw else None,
            classifier_config=cw.config if cw else None,
            intention_source=args.intention_source, per_block=not args.once,
        )
        reports = report.splits + [report.aggregate]
    write_report(report, args.out, args.mode)
    if args.csv:
        write_csv(reports, args.csv)
    print(summary_table(reports))
    return 0


def _read_window(path):
    try:
        _, seqs = dataio.read_motion(path)
        frames = seqs[0].frames
    except dataio.SchemaError:
        frames = dataio.read_dataset(path)[0].input
    if frames.shape[0] < dataio.INPUT_LEN:
        raise dataio.SchemaError(f"input window has {frames.shape[0]} frames, need "
                                 f"{dataio.INPUT_LEN}", field="frames")
    return frames[-dataio.INPUT_LEN:]


def cmd_predict(args):
    pw = load_checkpoint(args.predictor, kind="predictor")
    window = _read_window(args.input)
    header = {"horizon": args.horizon, "intention": args.intention, "predictor": args.predictor}
    if args.intention == "auto":
        if not args.classifier:
            raise ConfigError("--intention auto needs --classifier", field="classifier")
        cw = load_checkpoint(args.classifier, kind="classifier")
        motion, label, labels = classify_then_predict(cw, pw, window, args.horizon,
                                                      per_block=not args.once)
        header.update(voted_intention=label, block_labels=labels, classifier=args.classifier)
    else:
        label = int(args.intention)
        motion = rollout(pw, window, label, args.horizon)
        header["voted_intention"] = label
    seq = dataio.MotionSequence(motion)
    dataio.write_motion([seq], args.out, header=header)
    if args.csv:
        dataio.write_csv(seq, args.csv)
    print(f"wrote {motion.shape[0]} frames (intention {label}) to {args.out}")
    return 0


def cmd_bench(args):
    weights = load_checkpoint(args.checkpoint)
    cfg = weights.config
    x = np.random.default_rng(args.seed).normal(size=(cfg.T, cfg.C))
    stats = bench_inference(weights, x, runs=args.runs, warmup=args.warmup)
    doc = {"kind": weights.kind, "parameters": count_parameters(weights),
           "mean_ms": stats.mean_ms, "std_ms": stats.std_ms, "min_ms": stats.min_ms,
           "max_ms": stats.max_ms, "runs": stats.runs, "warmup": stats.warmup,
           "environment": stats.environment}
    print(format_audit(weights, REFERENCE_PARAMS.get(weights.kind)))
    print(f"mean {stats.mean_ms:.3f} ms  std {stats.std_ms:.3f}  min {stats.min_ms:.3f}  "
          f"max {stats.max_ms:.3f}  over {stats.runs} runs ({stats.warmup} warm-up)")
    print(json.dumps(stats.environment))
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    return 0


def _add_train_flags(p):
    p.add_argument("--config", help="training config (YAML/JSON)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lr-max", type=float)
    p.add_argument("--augment-prob", type=float)
    p.add_argument("--shift-prob", type=float)
    p.add_argument("--loss-suite", choices=("h", "re_v"))
    p.add_argument("--checkpoint-every", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="intentmotion")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic handover dataset")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a predictor or classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=("predictor", "classifier"), default="predictor")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", help="JSON-lines training log")
    p.add_argument("--resume", help="interval checkpoint to resume from")
    p.add_argument("--verbose", action="store_true")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="metrics on a dataset (single) or leave-one-out")
    p.add_argument("--data", required=True)
    p.add_argument("--predictor")
    p.add_argument("--classifier")
    p.add_argument("--mode", choices=("single", "loo"), default="single")
    p.add_argument("--intention-source", choices=("true", "classifier"), default="true")
    p.add_argument("--once", action="store_true", help="classify the seed window only")
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    _add_train_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="roll a trajectory out from an input window")
    p.add_argument("--predictor", required=True)
    p.add_argument("--classifier")
    p.add_argument("--input", required=True, help="motion file or dataset file (first sample)")
    p.add_argument("--horizon", type=int, default=25)
    p.add_argument("--intention", choices=("auto", "0", "1"), default="auto")
    p.add_argument("--once", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", help="single-threaded inference latency")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (IntentMotionError, OSError, ValueError) as exc:
        field = getattr(exc, "field", None)
        prefix = f"[{field}] " if field else ""
        print(f"error: {prefix}{exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
