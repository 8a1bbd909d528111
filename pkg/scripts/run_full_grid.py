#!/usr/bin/env python3
"""Run the full comparison grid (all arms over shared seed x fold cells)
and emit plot-ready tables.

This is the same grid the acceptance suite consumes; running it here
first warms the cache under tests/.cache so `pytest` skips the long
computation.
"""

import argparse
import sys
import time
from pathlib import Path

from cfaug.config import ExperimentConfig, config_hash, load_config
from cfaug.grid import run_grid, save_grid
from cfaug.pipeline import aggregate_cells, cells_to_csv


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", help="TOML/JSON experiment config (defaults used otherwise)")
    parser.add_argument("--out", default="runs/grid", help="output directory")
    parser.add_argument("--parallel", type=int, default=2)
    parser.add_argument("--seeds", type=int, default=None, help="override n_seeds")
    parser.add_argument(
        "--cache", default="tests/.cache", help="also store the acceptance-suite cache here"
    )
    args = parser.parse_args()

    config = load_config(args.config) if args.config else ExperimentConfig(name="acceptance")
    if args.seeds is not None:
        import dataclasses

        config = dataclasses.replace(config, n_seeds=args.seeds)

    t0 = time.time()
    print(f"running grid {config_hash(config)[:12]} over {config.n_seeds}x{config.folds} cells",
          file=sys.stderr)
    cells = run_grid(config, parallel=args.parallel)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_grid(cells, config, out)
    if args.cache:
        save_grid(cells, config, args.cache)
    (out / "cells.csv").write_text(cells_to_csv(cells), encoding="utf-8")
    import json

    (out / "aggregates.json").write_text(
        json.dumps(aggregate_cells(cells), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"{len(cells)} cells in {(time.time() - t0) / 60:.1f} min -> {out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
