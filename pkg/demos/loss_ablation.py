"""Train the three loss variants on the shipped toy suite and print a table.

    python demos/loss_ablation.py --steps 1500 --seeds 0 1 2

La routes everything through InfoNCE, Lb adds CoSENT for graded pairs and
Lc is the full hybrid loss. Expect roughly Lc > Lb > La in the average
column; at 1500 steps the full run takes about five minutes on one core.
"""

import argparse
from pathlib import Path

import numpy as np

from hybrid_embed.ablation import VARIANTS, run_variant
from hybrid_embed.evaluation import TASK_COLUMNS
from hybrid_embed.toy import load_suite
from hybrid_embed.trainer import TrainConfig

SUITE = Path(__file__).resolve().parents[1] / "data" / "toy_suite"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=1500)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = ap.parse_args()

    train_sets, suites = load_suite(SUITE)
    cfg = TrainConfig(steps=args.steps)
    cols = list(TASK_COLUMNS)
    print("variant  " + "  ".join(f"{TASK_COLUMNS[t]:>8}" for t in cols) + "      Avg.")
    for v in VARIANTS:
        reports = [run_variant(train_sets, suites, v, s, train_config=cfg)[0] for s in args.seeds]
        per_task = [np.mean([100 * r.per_task[t] for r in reports]) for t in cols]
        avgs = [100 * r.average for r in reports]
        print(f"{v:<7}  " + "  ".join(f"{x:8.2f}" for x in per_task)
              + f"  {np.mean(avgs):8.2f}   per seed {np.round(avgs, 2).tolist()}")


if __name__ == "__main__":
    main()
