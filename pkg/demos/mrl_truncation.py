"""Matryoshka truncation on the shipped toy suite.

    python demos/mrl_truncation.py --steps 1500

Trains one model with the loss summed over prefixes 16/32/64/128 and one
with the full dimension only, then evaluates the first model at every
prefix and both models at full width.
"""

import argparse
from pathlib import Path

from hybrid_embed.ablation import mrl_truncation, mrl_vs_single
from hybrid_embed.evaluation import format_reports
from hybrid_embed.toy import load_suite
from hybrid_embed.trainer import TrainConfig

SUITE = Path(__file__).resolve().parents[1] / "data" / "toy_suite"
DIMS = (16, 32, 64, 128)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=1500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    train_sets, suites = load_suite(SUITE)
    cfg = TrainConfig(steps=args.steps)
    by_dim = mrl_truncation(train_sets, suites, DIMS, seed=args.seed, train_config=cfg)
    print("MRL-trained model, evaluated at each prefix:")
    print(format_reports([by_dim[d] for d in DIMS]))

    both = mrl_vs_single(train_sets, suites, DIMS, seed=args.seed, train_config=cfg)
    print("\nfull-width average: MRL {:.2f}  single-dim {:.2f}".format(
        100 * both["mrl"].average, 100 * both["single"].average))


if __name__ == "__main__":
    main()
