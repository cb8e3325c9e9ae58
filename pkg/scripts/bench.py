"""Single-threaded latency of the full-size predictor and classifier forward passes."""
import argparse
import json

import numpy as np

from intentmotion.classifier import init_classifier
from intentmotion.evaluator import bench_inference
from intentmotion.predictor import count_parameters, init_weights


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=100)
    ap.add_argument("--warmup", type=int, default=10)
    args = ap.parse_args()

    x = np.random.default_rng(0).normal(size=(50, 27))
    for name, w in (("predictor", init_weights(seed=0)), ("classifier", init_classifier(seed=0))):
        s = bench_inference(w, x, runs=args.runs, warmup=args.warmup)
        print(f"{name:<10} {count_parameters(w):>8,} params  mean {s.mean_ms:6.2f} ms  "
              f"std {s.std_ms:5.2f}  min {s.min_ms:6.2f}  max {s.max_ms:6.2f}")
    print(json.dumps(s.environment, indent=2))


if __name__ == "__main__":
    main()
