"""Command-line entry point.

Every subcommand takes --config/--seed/--out; stdout carries exactly one
JSON summary line, human-readable progress goes to stderr.  Exit codes:
0 success, 2 usage, 3 configuration errors, 1 anything else.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .acquisition import (
    ModelScorer,
    pool_select,
    scores_to_csv,
    sentence_scorer,
    synthesize_loop,
)
from .annotate import OracleSink, session_item_from_counterfactual
from .config import (
    ExperimentConfig,
    config_hash,
    load_config,
    write_manifest,
)
from .errors import CfaugError, ConfigError
from .features import CAPC, PC, FeaturizerConfig, featurize
from .grammar import default_grammar_config, from_jsonl, sample_corpus, to_jsonl
from .labeler import (
    AnnotatedPair,
    LabelingPolicy,
    apply_policy,
    make_random_pair_policy,
    pair_encoder,
    train_pairwise,
)
from .modelio import load_model, save_model
from .neuralnet import ModelConfig, TrainConfig, init_model, train
from .perturb import (
    pool_from_jsonl,
    pool_to_jsonl,
    perturb_all,
    sidecar_to_jsonl,
)
from .pipeline import (
    ablate_type_experiment,
    arm_name,
    budget_sweep,
    cells_to_csv,
    error_rate,
    report_to_json,
    run_experiment,
)
from .rngs import derive_seed


def _progress(message: str) -> None:
    print(message, file=sys.stderr)


def _summary(**fields) -> None:
    print(json.dumps(fields, sort_keys=True))


def _load_cfg(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    config.validate()
    return config


def _out_dir(args, config: ExperimentConfig, config_path: str | None) -> Path:
    out = Path(args.out)
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        previous = json.loads(manifest_path.read_text())
        if previous.get("config_hash") == config_hash(config) and not args.force:
            raise CfaugError(
                f"{out}: outputs for this exact config already exist (use --force to overwrite)"
            )
    write_manifest(out, config, config_path)
    return out


def _tc(spec, seed: int) -> TrainConfig:
    return TrainConfig(
        spec.learning_rate, spec.batch_size, spec.epochs, seed, spec.weight_decay
    )


def _featurizer(config: ExperimentConfig) -> FeaturizerConfig:
    return FeaturizerConfig(
        n_gram_orders=frozenset(config.n_gram_orders), dimension=config.feature_dimension
    )


def _read_corpus(path: str):
    return from_jsonl(Path(path).read_text(encoding="utf-8"))


def _read_pool(path: str, sidecar: str | None = None):
    text = Path(path).read_text(encoding="utf-8")
    side = Path(sidecar).read_text(encoding="utf-8") if sidecar else None
    return pool_from_jsonl(text, side)


def _read_annotations(path: str) -> dict[str, int]:
    labels = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            rec = json.loads(line)
            labels[rec["id"]] = rec["label"]
    return labels


# ---------------------------------------------------------------------------
# subcommand handlers

def cmd_gen_corpus(args) -> None:
    config = _load_cfg(args)
    out = _out_dir(args, config, args.config)
    gc = default_grammar_config(
        n_examples=config.corpus_n,
        seed=derive_seed(config.seed, "corpus", 0),
        domain=args.domain,
        train_fraction=config.train_fraction,
    )
    dataset = sample_corpus(gc)
    path = out / f"corpus-{args.domain}.jsonl"
    path.write_text(to_jsonl(dataset), encoding="utf-8")
    _summary(command="gen-corpus", path=str(path), n=len(dataset), domain=args.domain)


def cmd_perturb(args) -> None:
    config = _load_cfg(args)
    out = _out_dir(args, config, args.config)
    corpus = _read_corpus(args.corpus)
    origins = corpus.split("train") or corpus.examples
    pool = perturb_all(
        origins,
        config.types,
        per_example=config.per_example,
        seed=derive_seed(config.seed, "perturb", 0),
        vocab=default_grammar_config(1, 0).vocab,
    )
    pool_path = out / "pool.jsonl"
    sidecar_path = out / "pool.oracle.jsonl"
    pool_path.write_text(pool_to_jsonl(pool.items), encoding="utf-8")
    sidecar_path.write_text(sidecar_to_jsonl(pool.items), encoding="utf-8")
    _summary(
        command="perturb",
        pool=str(pool_path),
        sidecar=str(sidecar_path),
        n=len(pool),
        type_counts=pool.type_counts,
    )


def cmd_train_f(args) -> None:
    config = _load_cfg(args)
    out = _out_dir(args, config, args.config)
    corpus = _read_corpus(args.corpus)
    featurizer = _featurizer(config)
    examples = corpus.split("train") or corpus.examples
    data = [(featurize(ex.tokens, featurizer), ex.label) for ex in examples]
    model = init_model(
        ModelConfig(config.feature_dimension, config.hidden_dim, 2, config.dropout_rate),
        derive_seed(config.seed, "f-init", 0),
    )
    result = train(model, data, _tc(config.train_f, derive_seed(config.seed, "f-train", 0)))
    path = out / "f.model"
    save_model(path, result.model, featurizer, kind="classifier")
    _summary(
        command="train-f",
        path=str(path),
        n_train=len(data),
        final_loss=result.epoch_losses[-1],
    )


def cmd_acquire(args) -> None:
    config = _load_cfg(args)
    out = _out_dir(args, config, args.config)
    corpus = _read_corpus(args.corpus)
    pool = _read_pool(args.pool, args.oracle)
    model, featurizer, _, _ = load_model(args.model_f)
    budget = args.budget or max(1, round(config.budget_fraction * len(pool)))
    seed = derive_seed(config.seed, "acquire", 0)
    if args.mode == "pool":
        selection = pool_select(
            pool, sentence_scorer(model, featurizer), budget, config.mc_passes, seed
        )
        (out / "selection.json").write_text(
            json.dumps({"ranked_ids": selection.ranked_ids}, indent=2) + "\n"
        )
        (out / "scores.csv").write_text(scores_to_csv([(0, s) for s in selection.scores]))
        _summary(command="acquire", mode="pool", selected=len(selection.ranked_ids))
        return

    # synthesis: run the loop against the oracle sink
    from .pipeline import _synthesis_rounds  # shared rounds arithmetic

    rounds, per_round = _synthesis_rounds(budget, config.synthesis_rounds)
    sink = OracleSink(origins=corpus, budget=budget)
    mode = CAPC if config.policy == "capc" else PC
    f_for_mode = model if mode == CAPC else None

    def retrain(annotated_items):
        h = train_pairwise(
            [
                AnnotatedPair(origin=corpus.by_id(cf.origin_id), cf=cf, label=label)
                for cf, label in annotated_items
            ],
            mode,
            _tc(config.train_h, derive_seed(config.seed, "h-train", 0)),
            featurizer,
            f=f_for_mode,
            hidden_dim=config.hidden_dim,
            dropout_rate=config.h_dropout_rate,
        )
        return ModelScorer(h.model, pair_encoder(mode, featurizer, corpus, f_for_mode)), h

    result = synthesize_loop(
        pool,
        corpus,
        default_grammar_config(1, 0).vocab,
        config.types,
        sentence_scorer(model, featurizer),
        retrain,
        rounds,
        per_round,
        sink,
        config.mc_passes,
        seed,
        per_origin=config.synthesis_per_origin,
    )
    (out / "annotations.jsonl").write_text(
        "".join(
            json.dumps({"id": i, "label": result.annotations[i]}) + "\n"
            for i in sorted(result.annotations)
        )
    )
    (out / "pool-enlarged.jsonl").write_text(pool_to_jsonl(result.pool))
    (out / "pool-enlarged.oracle.jsonl").write_text(sidecar_to_jsonl(result.pool))
    (out / "scores.csv").write_text(scores_to_csv(result.scores_log))
    _summary(
        command="acquire",
        mode="synthesis",
        annotated=len(result.annotations),
        pool_size=len(result.pool),
        rounds=rounds,
    )


def cmd_annotate_serve(args) -> None:
    from .service import serve

    serve(addr=args.addr, state_dir=args.state_dir)


def cmd_annotate_queue(args) -> None:
    """Write an annotation-queue JSONL for a selection over a pool."""
    config = _load_cfg(args)
    out = _out_dir(args, config, args.config)
    corpus = _read_corpus(args.corpus)
    pool = _read_pool(args.pool)
    selection = json.loads(Path(args.selection).read_text())["ranked_ids"]
    by_id = {cf.id: cf for cf in pool}
    records = []
    for item_id in selection:
        cf = by_id[item_id]
        origin = corpus.by_id(cf.origin_id)
        item = session_item_from_counterfactual(cf, origin.text, origin.label)
        records.append(json.dumps(dataclasses.asdict(item), ensure_ascii=False))
    path = out / "queue.jsonl"
    path.write_text("\n".join(records) + "\n" if records else "", encoding="utf-8")
    _summary(command="annotate-queue", path=str(path), n=len(records))


def cmd_label(args) -> None:
    config = _load_cfg(args)
    if args.policy:
        config = dataclasses.replace(config, policy=args.policy)
    config.validate()
    out = _out_dir(args, config, args.config)
    corpus = _read_corpus(args.corpus)
    pool = _read_pool(args.pool, args.oracle)
    featurizer = _featurizer(config)
    annotations = _read_annotations(args.annotations) if args.annotations else {}

    f = None
    if args.model_f:
        f, featurizer, _, _ = load_model(args.model_f)
    h = None
    if config.policy in ("pc", "capc"):
        by_id = {cf.id: cf for cf in pool}
        pairs = [
            AnnotatedPair(origin=corpus.by_id(by_id[i].origin_id), cf=by_id[i], label=y)
            for i, y in annotations.items()
        ]
        mode = CAPC if config.policy == "capc" else PC
        h = train_pairwise(
            pairs,
            mode,
            _tc(config.train_h, derive_seed(config.seed, "h-train", 0)),
            featurizer,
            f=f if mode == CAPC else None,
            hidden_dim=config.hidden_dim,
            dropout_rate=config.h_dropout_rate,
        )
    elif config.policy == "random_pair":
        h = make_random_pair_policy(
            corpus.split("train") or corpus.examples,
            n_pairs=max(1, len(annotations)),
            tc=_tc(config.train_h, derive_seed(config.seed, "h-train", 0)),
            featurizer=featurizer,
            hidden_dim=config.hidden_dim,
            dropout_rate=config.h_dropout_rate,
        )

    if config.policy in ("pc", "capc", "random_pair"):
        policy = LabelingPolicy(
            kind=config.policy,
            model=h,
            base=f if config.policy == "capc" else None,
            featurizer=featurizer,
        )
    elif config.policy in ("trust", "wtrust"):
        if f is None:
            raise ConfigError(f"policy {config.policy!r} requires --model-f")
        policy = LabelingPolicy(kind=config.policy, base=f, featurizer=featurizer)
    elif config.policy == "none":
        raise ConfigError("policy 'none' does not label pools")
    else:
        policy = LabelingPolicy(kind=config.policy)

    labeled = apply_policy(policy, pool, annotations, corpus)
    path = out / "labeled.jsonl"
    path.write_text(pool_to_jsonl(labeled), encoding="utf-8")
    _summary(command="label", policy=config.policy, path=str(path), n=len(labeled))


def cmd_augment_train(args) -> None:
    config = _load_cfg(args)
    out = _out_dir(args, config, args.config)
    corpus = _read_corpus(args.corpus)
    labeled = _read_pool(args.labeled)
    unlabeled = [cf for cf in labeled if cf.assigned_label is None]
    if unlabeled:
        raise ConfigError(f"{len(unlabeled)} pool items are unlabeled; run `label` first")
    model, featurizer, _, _ = load_model(args.model_f)
    data = [
        (featurize(ex.tokens, featurizer), ex.label)
        for ex in (corpus.split("train") or corpus.examples)
    ]
    data += [(featurize(cf.tokens, featurizer), cf.assigned_label) for cf in labeled]
    result = train(
        model, data, _tc(config.finetune_f, derive_seed(config.seed, "finetune", 0))
    )
    path = out / "f-finetuned.model"
    save_model(path, result.model, featurizer, kind="classifier")
    _summary(command="augment-train", path=str(path), n_train=len(data))


def cmd_evaluate(args) -> None:
    config = _load_cfg(args)
    out = _out_dir(args, config, args.config)
    model, featurizer, _, _ = load_model(args.model)
    corpus = _read_corpus(args.corpus)
    metrics: dict = {}
    test = corpus.split("test")
    if test:
        metrics["original_test_error"] = error_rate(
            model,
            [featurize(ex.tokens, featurizer) for ex in test],
            [ex.label for ex in test],
        )
    if args.pool:
        pool = _read_pool(args.pool, args.oracle)
        metrics["cf_test_error"] = error_rate(
            model,
            [featurize(cf.tokens, featurizer) for cf in pool],
            [cf.oracle_label for cf in pool],
        )
        per_type: dict[str, float] = {}
        for ptype in sorted({cf.type for cf in pool}):
            items = [cf for cf in pool if cf.type == ptype]
            per_type[ptype] = error_rate(
                model,
                [featurize(cf.tokens, featurizer) for cf in items],
                [cf.oracle_label for cf in items],
            )
        metrics["cf_type_error"] = per_type
    (out / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    _summary(command="evaluate", **metrics)


def cmd_experiment(args) -> None:
    config = _load_cfg(args)
    out = _out_dir(args, config, args.config)
    _progress(f"running experiment arm={arm_name(config)} over {config.n_seeds}x{config.folds} cells")
    report = run_experiment(config, parallel=args.parallel)
    short = report.config_hash[:12]
    report_path = out / f"report_{short}.json"
    csv_path = out / f"metrics_{short}.csv"
    report_path.write_text(report_to_json(report), encoding="utf-8")
    csv_path.write_text(cells_to_csv(report.cells), encoding="utf-8")
    _summary(
        command="experiment",
        report=str(report_path),
        csv=str(csv_path),
        cells=len(report.cells),
        config_hash=report.config_hash,
    )


def cmd_sweep_budget(args) -> None:
    config = _load_cfg(args)
    out = _out_dir(args, config, args.config)
    budgets = [float(b) for b in args.budgets.split(",") if b]
    rows = budget_sweep(config, budgets, parallel=args.parallel)
    lines = ["budget,cf_test_error_mean,cf_test_error_stderr,n"]
    for row in rows:
        lines.append(
            f"{row['budget']},{row['cf_test_error_mean']!r},{row['cf_test_error_stderr']!r},{row['n']}"
        )
    path = out / "budget_sweep.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _summary(command="sweep-budget", path=str(path), rows=len(rows))


def cmd_ablate_type(args) -> None:
    config = _load_cfg(args)
    out = _out_dir(args, config, args.config)
    report = ablate_type_experiment(config, args.type, args.scope, parallel=args.parallel)
    short = report.config_hash[:12]
    report_path = out / f"report_{short}.json"
    report_path.write_text(report_to_json(report), encoding="utf-8")
    (out / f"metrics_{short}.csv").write_text(cells_to_csv(report.cells), encoding="utf-8")
    arm = f"{report.cells[0]['arm']}" if report.cells else ""
    key = f"{arm}/cf_type_error.{args.type}"
    _summary(
        command="ablate-type",
        report=str(report_path),
        ablated_slice=report.aggregates.get(key),
    )


def cmd_report(args) -> None:
    cells = []
    for run_dir in args.runs:
        manifest_path = Path(run_dir) / "manifest.json"
        manifest_hash = (
            json.loads(manifest_path.read_text()).get("config_hash")
            if manifest_path.exists()
            else None
        )
        for path in sorted(Path(run_dir).glob("report_*.json")):
            doc = json.loads(path.read_text())
            if manifest_hash is not None and doc.get("config_hash") != manifest_hash:
                raise CfaugError(
                    f"{path}: config hash {doc.get('config_hash')!r} does not match "
                    f"the run manifest ({manifest_hash!r})"
                )
            cells.extend(doc["cells"])
    if not cells:
        raise CfaugError("no report_*.json files found under the given directories")
    from .pipeline import aggregate_cells

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "combined_cells.csv").write_text(cells_to_csv(cells), encoding="utf-8")
    (out / "combined_aggregates.json").write_text(
        json.dumps(aggregate_cells(cells), indent=2, sort_keys=True) + "\n"
    )
    _summary(command="report", cells=len(cells), out=str(out))


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfaug", description=__doc__)
    parser.add_argument("--version", action="version", version=f"cfaug {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="TOML (or JSON) experiment config")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", required=out_required, help="output directory")
        p.add_argument("--force", action="store_true", help="overwrite an existing run")

    p = sub.add_parser("gen-corpus", help="sample an oracle-labeled corpus")
    common(p)
    p.add_argument("--domain", default="in-domain", choices=["in-domain", "ood-vocab", "ood-style"])
    p.set_defaults(func=cmd_gen_corpus)

    p = sub.add_parser("perturb", help="generate the counterfactual pool")
    common(p)
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("train-f", help="train the base classifier")
    common(p)
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_train_f)

    p = sub.add_parser("acquire", help="select items for annotation")
    common(p)
    p.add_argument("--mode", required=True, choices=["pool", "synthesis"])
    p.add_argument("--corpus", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--oracle", help="oracle sidecar (required for synthesis)")
    p.add_argument("--model-f", required=True)
    p.add_argument("--budget", type=int, default=None)
    p.set_defaults(func=cmd_acquire)

    p = sub.add_parser("annotate", help="annotation service")
    annotate_sub = p.add_subparsers(dest="annotate_command", required=True)
    serve_p = annotate_sub.add_parser("serve", help="run the HTTP annotation service")
    serve_p.add_argument("--addr", default=None, help="host:port (or CFAUG_ADDR)")
    serve_p.add_argument("--state-dir", default=None, help="event-log dir (or CFAUG_STATE_DIR)")
    serve_p.set_defaults(func=cmd_annotate_serve)
    queue_p = annotate_sub.add_parser("queue", help="build an annotation queue file")
    common(queue_p)
    queue_p.add_argument("--corpus", required=True)
    queue_p.add_argument("--pool", required=True)
    queue_p.add_argument("--selection", required=True)
    queue_p.set_defaults(func=cmd_annotate_queue)

    p = sub.add_parser("label", help="label a pool with a policy")
    common(p)
    p.add_argument("--policy", default=None)
    p.add_argument("--corpus", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--oracle", help="oracle sidecar (for downstream evaluation only)")
    p.add_argument("--annotations", help="JSONL of {id, label} human/oracle annotations")
    p.add_argument("--model-f", help="base classifier model file")
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("augment-train", help="fine-tune the base classifier on a labeled pool")
    common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--labeled", required=True)
    p.add_argument("--model-f", required=True)
    p.set_defaults(func=cmd_augment_train)

    p = sub.add_parser("evaluate", help="error rates of a model on corpus/pool files")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--pool")
    p.add_argument("--oracle")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="full protocol: one arm over seeds x folds")
    common(p)
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("sweep-budget", help="run the experiment across budgets")
    common(p)
    p.add_argument("--budgets", required=True, help="comma-separated fractions in (0,1]")
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_sweep_budget)

    p = sub.add_parser("ablate-type", help="ablate a counterfactual type")
    common(p)
    p.add_argument("--type", required=True)
    p.add_argument("--scope", required=True, choices=["h_only", "h_and_f"])
    p.add_argument("--parallel", type=int, default=1)
    p.set_defaults(func=cmd_ablate_type)

    p = sub.add_parser("report", help="aggregate cells across runs")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return 3
    except CfaugError as exc:
        print(json.dumps({"error": "runtime", "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
