"""Multi-arm experiment grids over shared (seed, fold) cells.

Every arm at a given cell sees the same corpus, base classifier,
counterfactual pool, fold split, and (for uniform sampling) the same
annotation subset, so cross-arm comparisons pair cleanly.
"""

from __future__ import annotations

import dataclasses
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from .config import ExperimentConfig, config_hash, config_to_dict
from .pipeline import build_seed_artifacts, run_cell, run_failure_gap_cell

FG_POLICIES = ("invariant", "pc", "capc")


def grid_arm_configs(base: ExperimentConfig) -> list[ExperimentConfig]:
    """The full comparison grid: baselines, pairwise labelers, active
    sampling variants, the all-oracle arm, and the type ablations."""
    r = dataclasses.replace
    no_ood = {"eval_ood": False}
    return [
        r(base, policy="none"),
        r(base, policy="invariant"),
        r(base, policy="trust", **no_ood),
        r(base, policy="wtrust", **no_ood),
        r(base, policy="random_pair", **no_ood),
        r(base, policy="pc", **no_ood),
        r(base, policy="capc", **no_ood),
        r(base, policy="capc", sampling="pool", **no_ood),
        r(base, policy="capc", sampling="synthesis"),
        r(base, policy="invariant", budget_fraction=1.0, **no_ood),
        r(base, policy="capc", sampling="synthesis", ablate_type="restructure", ablate_scope="h_only", **no_ood),
        r(base, policy="capc", sampling="synthesis", ablate_type="shuffle", ablate_scope="h_only", **no_ood),
        r(base, policy="capc", sampling="synthesis", ablate_type="negation", ablate_scope="h_and_f", **no_ood),
    ]


def _run_grid_seed(args) -> list[dict]:
    base, seed_idx, with_fg = args
    art = build_seed_artifacts(base, seed_idx)
    cells = []
    for arm_config in grid_arm_configs(base):
        for fold in range(base.folds):
            cells.append(run_cell(arm_config, art, seed_idx, fold))
    if with_fg:
        for policy in FG_POLICIES:
            for fold in range(base.folds):
                cells.append(run_failure_gap_cell(base, art, seed_idx, fold, policy))
    return cells


def run_grid(
    base: ExperimentConfig, parallel: int = 1, with_failure_gap: bool = True
) -> list[dict]:
    base.validate()
    tasks = [(base, si, with_failure_gap) for si in range(base.n_seeds)]
    if parallel > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            chunks = list(pool.map(_run_grid_seed, tasks))
    else:
        chunks = [_run_grid_seed(t) for t in tasks]
    cells = [cell for chunk in chunks for cell in chunk]
    cells.sort(key=lambda c: (c["arm"], c["seed"], c["fold"]))
    return cells


def cells_by_arm(cells: Sequence[dict]) -> dict[str, dict[tuple[int, int], dict]]:
    """arm -> {(seed, fold): cell}, for paired lookups."""
    out: dict[str, dict[tuple[int, int], dict]] = {}
    for cell in cells:
        out.setdefault(cell["arm"], {})[(cell["seed"], cell["fold"])] = cell
    return out


def paired_metric(
    by_arm: dict,
    arm_a: str,
    arm_b: str,
    metric: str,
    subkey: str | None = None,
) -> list[tuple[float, float]]:
    """Aligned (a, b) metric values over the shared cells of two arms."""

    def value(cell):
        v = cell[metric]
        return v[subkey] if subkey is not None else v

    a_cells, b_cells = by_arm[arm_a], by_arm[arm_b]
    pairs = []
    for key in sorted(set(a_cells) & set(b_cells)):
        va, vb = value(a_cells[key]), value(b_cells[key])
        if va is not None and vb is not None:
            pairs.append((float(va), float(vb)))
    return pairs


def save_grid(cells: Sequence[dict], base: ExperimentConfig, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"grid_{config_hash(base)[:12]}.json"
    doc = {"config": config_to_dict(base), "config_hash": config_hash(base), "cells": list(cells)}
    path.write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")
    return path


def load_grid(path: str | Path) -> list[dict]:
    return json.loads(Path(path).read_text(encoding="utf-8"))["cells"]
