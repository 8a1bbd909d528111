#!/usr/bin/env python3
"""Minutes-scale walkthrough of the whole pipeline at reduced size.

Prints per-arm labeling accuracy and counterfactual error for the main
policies on a single seed, then a budget sweep for the synthesized
CAPC arm.  Useful as a smoke test and as a template for custom runs.
"""

import dataclasses
import sys
import time

from cfaug.config import ExperimentConfig, TrainSpec
from cfaug.pipeline import build_seed_artifacts, budget_sweep, run_cell

CONFIG = ExperimentConfig(
    name="demo",
    seed=1,
    n_seeds=1,
    folds=4,
    corpus_n=1500,
    pool_origins=120,
    train_f=TrainSpec(0.1, 16, 12),
    finetune_f=TrainSpec(0.1, 16, 12),
    mc_passes=10,
    ood_n=500,
)

ARMS = [
    ("no-cda", {"policy": "none"}),
    ("invariant", {"policy": "invariant"}),
    ("trust", {"policy": "trust"}),
    ("pc", {"policy": "pc"}),
    ("capc", {"policy": "capc"}),
    ("p-capc", {"policy": "capc", "sampling": "pool"}),
    ("s-capc", {"policy": "capc", "sampling": "synthesis"}),
]


def main() -> int:
    t0 = time.time()
    art = build_seed_artifacts(CONFIG, 0)
    print(f"corpus {len(art.corpus)} examples, pool {len(art.pool)} counterfactuals", file=sys.stderr)
    print(f"{'arm':>10}  {'label_acc':>9}  {'cf_error':>8}  {'ood_vocab':>9}")
    for name, overrides in ARMS:
        config = dataclasses.replace(CONFIG, **overrides)
        cells = [run_cell(config, art, 0, fold) for fold in range(CONFIG.folds)]
        lab = [c["labeler_accuracy"] for c in cells if c["labeler_accuracy"] is not None]
        lab_mean = sum(lab) / len(lab) if lab else float("nan")
        cf = sum(c["cf_test_error"] for c in cells) / len(cells)
        ood = sum(c["ood_error"]["ood-vocab"] for c in cells) / len(cells)
        print(f"{name:>10}  {lab_mean:9.3f}  {cf:8.3f}  {ood:9.3f}")

    print("\nbudget sweep (s-capc):", file=sys.stderr)
    rows = budget_sweep(
        dataclasses.replace(CONFIG, policy="capc", sampling="synthesis", eval_ood=False),
        [0.05, 0.1, 0.2, 0.4, 1.0],
    )
    print(f"{'budget':>7}  {'cf_error':>8}  {'stderr':>7}")
    for row in rows:
        print(f"{row['budget']:7.2f}  {row['cf_test_error_mean']:8.3f}  {row['cf_test_error_stderr']:7.4f}")
    print(f"done in {time.time() - t0:.0f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
