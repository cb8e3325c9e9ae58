"""Overfit the full predictor on 8 noiseless synthetic samples and report the loss drop."""
import argparse

from intentmotion.dataio import GeneratorConfig, generate_synthetic
from intentmotion.trainer import TrainConfig, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--epochs", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=6)
    ap.add_argument("--log", help="JSON-lines training log")
    args = ap.parse_args()

    samples = generate_synthetic(GeneratorConfig(subjects=2, samples_per_subject=4,
                                                 noise_std_m=0.0, seed=args.seed))
    cfg = TrainConfig(epochs=args.epochs, batch_size=8, augment_prob=0.0, seed=0)
    _, log = train(samples, "predictor", cfg, log_path=args.log)
    first, last = log[0], log[-1]
    print(f"L_re {first['re']:.3e} -> {last['re']:.3e}")
    print(f"total {first['total']:.3e} -> {last['total']:.3e} "
          f"({first['total'] / last['total']:.0f}x reduction)")


if __name__ == "__main__":
    main()
