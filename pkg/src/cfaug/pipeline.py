"""End-to-end experiment harness.

One run cell = (seed, fold): train the base classifier on original
training data, generate a counterfactual pool from training originals,
split the pool by origin into an annotate-or-policy side and a held-out
test side, spend the oracle budget according to the sampling strategy,
label the rest with the configured policy, fine-tune the base
classifier on the union, and evaluate robustness.  Reports aggregate
mean and standard error (s / sqrt(n)) over all cells.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .acquisition import ModelScorer, pool_select, sentence_scorer, synthesize_loop
from .annotate import OracleSink
from .config import ExperimentConfig, config_hash, config_to_dict
from .errors import ContractError, EmptySliceError
from .features import CAPC, PC, FeaturizerConfig, SparseVector, featurize
from .grammar import (
    Dataset,
    Example,
    default_grammar_config,
    make_ood_corpus,
    sample_corpus,
)
from .labeler import (
    AnnotatedPair,
    LabelingPolicy,
    PairwiseClassifier,
    make_random_pair_policy,
    pair_encoder,
    train_pairwise,
)
from .neuralnet import (
    Model,
    ModelConfig,
    Packed,
    TrainConfig,
    error_rate_packed,
    init_model,
    pack,
    predict_labels,
    train,
    with_dropout,
)
from .perturb import Counterfactual, perturb_all
from .rngs import derive_rng, derive_seed

OOD_DOMAINS = ("ood-vocab", "ood-style")


# ---------------------------------------------------------------------------
# small numeric operations

def split_folds(items: Sequence, k: int, seed: int) -> list[list]:
    """Shuffle then deal round-robin into k folds with sizes differing by <= 1."""
    items = list(items)
    if k < 1 or k > len(items):
        raise ContractError(f"cannot split {len(items)} items into {k} folds")
    order = derive_rng(seed, "folds").permutation(len(items))
    folds: list[list] = [[] for _ in range(k)]
    for pos, idx in enumerate(order):
        folds[pos % k].append(items[idx])
    return folds


def summarize(samples: Sequence[float]) -> tuple[float, float]:
    """Mean and standard error s / sqrt(n) with the n-1 denominator."""
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size < 2:
        raise ContractError("summarize needs at least 2 samples")
    if np.all(arr == arr[0]):
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / math.sqrt(arr.size))


def error_rate(model: Model, vectors: Sequence[SparseVector], labels: Sequence[int]) -> float:
    """Fraction of argmax-misclassified items, dropout off."""
    if not vectors:
        raise EmptySliceError("cannot compute an error rate on an empty set")
    return error_rate_packed(model, pack(vectors), np.asarray(labels))


def failure_gap(
    model: Model,
    packed: Packed,
    oracle_labels: np.ndarray,
    assigned_labels: np.ndarray,
) -> float:
    """|true error - error measured against policy-assigned labels|."""
    if len(packed) == 0:
        raise EmptySliceError("failure gap needs a nonempty pool")
    predictions = predict_labels(model, packed)
    eps = float(np.mean(predictions != oracle_labels))
    eps_a = float(np.mean(predictions != assigned_labels))
    return abs(eps - eps_a)


# ---------------------------------------------------------------------------
# per-seed artifacts shared by every fold and arm

@dataclass
class SeedArtifacts:
    seed_idx: int
    corpus: Dataset
    vocab: Mapping[str, tuple[str, ...]]
    featurizer: FeaturizerConfig
    f0: Model
    f_warm: Model | None
    train_examples: list[Example]
    train_vectors: list[SparseVector]
    pool: list[Counterfactual]
    origin_folds: list[list[str]]
    cf_vectors: dict[str, SparseVector] = field(default_factory=dict)
    test_pack: Packed | None = None
    test_labels: np.ndarray | None = None
    ood_packs: dict[str, tuple[Packed, np.ndarray]] = field(default_factory=dict)
    flip_mix: tuple[list[Counterfactual], list[Counterfactual]] | None = None

    def vector_for(self, cf: Counterfactual) -> SparseVector:
        vec = self.cf_vectors.get(cf.id)
        if vec is None:
            vec = featurize(cf.tokens, self.featurizer)
            self.cf_vectors[cf.id] = vec
        return vec


def _tc(spec, seed: int) -> TrainConfig:
    return TrainConfig(
        spec.learning_rate, spec.batch_size, spec.epochs, seed, spec.weight_decay
    )


def build_seed_artifacts(config: ExperimentConfig, seed_idx: int) -> SeedArtifacts:
    grammar_config = default_grammar_config(
        n_examples=config.corpus_n,
        seed=derive_seed(config.seed, "corpus", seed_idx),
        train_fraction=config.train_fraction,
    )
    corpus = sample_corpus(grammar_config)
    featurizer = FeaturizerConfig(
        n_gram_orders=frozenset(config.n_gram_orders), dimension=config.feature_dimension
    )
    train_examples = corpus.split("train")
    train_vectors = [featurize(ex.tokens, featurizer) for ex in train_examples]

    train_data = list(zip(train_vectors, [ex.label for ex in train_examples]))
    f_init = init_model(
        ModelConfig(config.feature_dimension, config.hidden_dim, 2, config.dropout_rate),
        derive_seed(config.seed, "f-init", seed_idx),
    )
    f0 = train(
        f_init, train_data, _tc(config.train_f, derive_seed(config.seed, "f-train", seed_idx))
    ).model
    f_warm = None
    if config.h_warm_start:
        warm_init = init_model(
            ModelConfig(
                config.feature_dimension, config.hidden_dim, 2, config.h_warm_start_dropout
            ),
            derive_seed(config.seed, "f-warm-init", seed_idx),
        )
        f_warm = train(
            warm_init,
            train_data,
            _tc(config.train_f, derive_seed(config.seed, "f-warm-train", seed_idx)),
        ).model

    rng = derive_rng(config.seed, "pool-origins", seed_idx)
    n_origins = min(config.pool_origins, len(train_examples))
    chosen = rng.choice(len(train_examples), size=n_origins, replace=False)
    origins = sorted((train_examples[i] for i in chosen), key=lambda ex: ex.id)
    pool = list(
        perturb_all(
            origins,
            config.types,
            per_example=config.per_example,
            seed=derive_seed(config.seed, "perturb", seed_idx),
            vocab=grammar_config.vocab,
        )
    )
    origin_folds = split_folds(
        sorted({ex.id for ex in origins}),
        config.folds,
        derive_seed(config.seed, "fold-split", seed_idx),
    )

    art = SeedArtifacts(
        seed_idx=seed_idx,
        corpus=corpus,
        vocab=grammar_config.vocab,
        featurizer=featurizer,
        f0=f0,
        f_warm=f_warm,
        train_examples=train_examples,
        train_vectors=train_vectors,
        pool=pool,
        origin_folds=origin_folds,
    )
    test_examples = corpus.split("test")
    art.test_pack = pack([featurize(ex.tokens, featurizer) for ex in test_examples])
    art.test_labels = np.array([ex.label for ex in test_examples])
    if config.eval_ood:
        for domain in OOD_DOMAINS:
            ood = make_ood_corpus(
                default_grammar_config(
                    n_examples=config.ood_n,
                    seed=derive_seed(config.seed, "ood", seed_idx, domain),
                    domain=domain,
                    train_fraction=0.0,
                )
            )
            art.ood_packs[domain] = (
                pack([featurize(ex.tokens, featurizer) for ex in ood]),
                np.array([ex.label for ex in ood]),
            )
    return art


def fold_split(
    art: SeedArtifacts, fold_idx: int, k: int
) -> tuple[list[Counterfactual], list[Counterfactual]]:
    """Pool split by origin: test side = k//2 consecutive folds from fold_idx."""
    test_origins = set()
    for j in range(max(1, k // 2)):
        test_origins.update(art.origin_folds[(fold_idx + j) % k])
    test = [cf for cf in art.pool if cf.origin_id in test_origins]
    work = [cf for cf in art.pool if cf.origin_id not in test_origins]
    return work, test


# ---------------------------------------------------------------------------
# one run cell

def _synthesis_rounds(budget: int, max_rounds: int) -> tuple[int, int]:
    for r in range(min(max_rounds, budget), 0, -1):
        if budget % r == 0:
            return r, budget // r
    return 1, budget


def _pair_from_annotation(art: SeedArtifacts, cf: Counterfactual, label: int) -> AnnotatedPair:
    return AnnotatedPair(origin=art.corpus.by_id(cf.origin_id), cf=cf, label=label)


def _h_trainer(config: ExperimentConfig, art: SeedArtifacts, seed_idx: int, fold_idx: int):
    """Closure training the pairwise labeler on oracle annotations.

    Honors h_only/h_and_f ablation by dropping the ablated type from the
    training pairs (the pool itself is already filtered for h_and_f).
    """
    mode = CAPC if config.policy == "capc" else PC
    f_for_mode = art.f0 if mode == CAPC else None
    h_seed = derive_seed(config.seed, "h-train", seed_idx, fold_idx)

    def fit(annotated_items: Sequence[tuple[Counterfactual, int]]) -> PairwiseClassifier:
        pairs = [
            _pair_from_annotation(art, cf, label)
            for cf, label in annotated_items
            if not (config.ablate_type and cf.type == config.ablate_type)
        ]
        if not pairs:
            raise ContractError("no usable annotated pairs to train the pairwise labeler")
        return train_pairwise(
            pairs,
            mode,
            _tc(config.train_h, h_seed),
            art.featurizer,
            f=f_for_mode,
            hidden_dim=config.hidden_dim,
            dropout_rate=config.h_dropout_rate,
            warm_start=art.f_warm if config.h_warm_start else None,
        )

    return fit


def run_cell(config: ExperimentConfig, art: SeedArtifacts, seed_idx: int, fold_idx: int) -> dict:
    work, cf_test = fold_split(art, fold_idx, config.folds)
    if config.ablate_type and config.ablate_scope == "h_and_f":
        work = [cf for cf in work if cf.type != config.ablate_type]
    test_ids = {cf.id for cf in cf_test}

    cell: dict = {
        "arm": arm_name(config),
        "seed": seed_idx,
        "fold": fold_idx,
        "budget_fraction": config.budget_fraction,
        "pool_work_size": len(work),
        "pool_test_size": len(cf_test),
    }

    touched: set[str] = set()
    if config.policy == "none":
        model = art.f0
        cell["oracle_queries"] = 0
        labeled = None
    else:
        budget = math.ceil(config.budget_fraction * len(work))
        sink = OracleSink(origins=art.corpus, budget=budget)
        by_id = {cf.id: cf for cf in work}
        h: PairwiseClassifier | None = None
        pool_items = work

        if config.sampling == "none":
            rng = derive_rng(config.seed, "select", seed_idx, fold_idx)
            order = rng.permutation(len(work))
            selected = [work[i] for i in order[:budget]]
            annotations = sink.annotate(selected)
        elif config.sampling == "pool":
            selection = pool_select(
                work,
                sentence_scorer(with_dropout(art.f0, config.mc_dropout_rate), art.featurizer),
                budget,
                config.mc_passes,
                derive_seed(config.seed, "acquire", seed_idx, fold_idx),
            )
            annotations = sink.annotate([by_id[i] for i in selection.ranked_ids])
        else:  # synthesis
            rounds, per_round = _synthesis_rounds(budget, config.synthesis_rounds)
            fit = _h_trainer(config, art, seed_idx, fold_idx)
            mode = CAPC if config.policy == "capc" else PC
            f_for_mode = art.f0 if mode == CAPC else None

            sentence_mc = sentence_scorer(
                with_dropout(art.f0, config.mc_dropout_rate), art.featurizer
            )

            def retrain(annotated_items):
                h_new = fit(annotated_items)
                if config.synthesis_score_with_h:
                    scorer = ModelScorer(
                        with_dropout(h_new.model, config.mc_dropout_rate),
                        pair_encoder(mode, art.featurizer, art.corpus, f_for_mode),
                    )
                else:
                    # the base classifier's posterior is the informative
                    # one here; the pairwise model inherits its warm-start
                    # twin's redundancy and its masks stop disagreeing
                    # exactly where labels are at risk
                    scorer = sentence_mc
                return scorer, h_new

            gen_types = tuple(
                t
                for t in config.types
                if not (config.ablate_scope == "h_and_f" and t == config.ablate_type)
            )
            result = synthesize_loop(
                work,
                art.corpus,
                art.vocab,
                gen_types,
                sentence_mc,
                retrain,
                rounds,
                per_round,
                sink,
                config.mc_passes,
                derive_seed(config.seed, "acquire", seed_idx, fold_idx),
                per_origin=config.synthesis_per_origin,
            )
            pool_items = result.pool
            annotations = result.annotations
            h = result.model
            cell["pool_final_size"] = len(pool_items)

        if config.policy in ("pc", "capc") and h is None:
            items_by_id = {cf.id: cf for cf in pool_items}
            h = _h_trainer(config, art, seed_idx, fold_idx)(
                [(items_by_id[i], y) for i, y in annotations.items()]
            )
        if config.policy == "random_pair":
            h = make_random_pair_policy(
                art.train_examples,
                n_pairs=budget,
                tc=_tc(config.train_h, derive_seed(config.seed, "h-train", seed_idx, fold_idx)),
                featurizer=art.featurizer,
                hidden_dim=config.hidden_dim,
                dropout_rate=config.h_dropout_rate,
            )

        policy = _build_policy(config, art, h)
        labeled = _apply(policy, pool_items, annotations, art)
        cell["oracle_queries"] = sink.queries
        touched.update(annotations)
        touched.update(cf.id for cf in labeled)

        ft_data = list(zip(art.train_vectors, (ex.label for ex in art.train_examples)))
        ft_data += [(art.vector_for(cf), cf.assigned_label) for cf in labeled]
        model = train(
            art.f0,
            ft_data,
            _tc(config.finetune_f, derive_seed(config.seed, "finetune", seed_idx, fold_idx)),
        ).model

    cell["isolation_ok"] = not (touched & test_ids)
    _evaluate(cell, config, art, model, cf_test, labeled)
    return cell


def _build_policy(
    config: ExperimentConfig, art: SeedArtifacts, h: PairwiseClassifier | None
) -> LabelingPolicy:
    kind = config.policy
    if kind in ("pc", "capc", "random_pair"):
        base = art.f0 if kind == "capc" else None
        return LabelingPolicy(kind=kind, model=h, base=base, featurizer=art.featurizer)
    if kind in ("trust", "wtrust"):
        return LabelingPolicy(kind=kind, base=art.f0, featurizer=art.featurizer)
    return LabelingPolicy(kind=kind)


def _apply(policy, pool_items, annotations, art) -> list[Counterfactual]:
    from .labeler import apply_policy

    return apply_policy(policy, pool_items, annotations, art.corpus)


def _evaluate(
    cell: dict,
    config: ExperimentConfig,
    art: SeedArtifacts,
    model: Model,
    cf_test: list[Counterfactual],
    labeled: list[Counterfactual] | None,
) -> None:
    cell["original_test_error"] = error_rate_packed(model, art.test_pack, art.test_labels)

    test_vecs = [art.vector_for(cf) for cf in cf_test]
    test_labels = np.array([cf.oracle_label for cf in cf_test])
    test_pack = pack(test_vecs)
    predictions = predict_labels(model, test_pack)
    cell["cf_test_error"] = float(np.mean(predictions != test_labels))

    per_type: dict[str, float | None] = {}
    for ptype in config.types:
        mask = np.array([cf.type == ptype for cf in cf_test])
        per_type[ptype] = (
            float(np.mean(predictions[mask] != test_labels[mask])) if mask.any() else None
        )
    cell["cf_type_error"] = per_type
    present = [v for v in per_type.values() if v is not None]
    cell["cf_type_error_macro"] = float(np.mean(present)) if present else None

    if labeled is not None:
        policy_items = [cf for cf in labeled if cf.label_source.startswith("policy:")]
        if policy_items:
            cell["labeler_accuracy"] = float(
                np.mean([cf.assigned_label == cf.oracle_label for cf in policy_items])
            )
        else:
            cell["labeler_accuracy"] = None
        lab_pack = pack([art.vector_for(cf) for cf in labeled])
        cell["failure_gap"] = failure_gap(
            model,
            lab_pack,
            np.array([cf.oracle_label for cf in labeled]),
            np.array([cf.assigned_label for cf in labeled]),
        )
    else:
        cell["labeler_accuracy"] = None
        cell["failure_gap"] = None

    cell["ood_error"] = {}
    if config.eval_ood:
        for domain, (packed, labels) in art.ood_packs.items():
            cell["ood_error"][domain] = error_rate_packed(model, packed, labels)


def arm_name(config: ExperimentConfig) -> str:
    if config.policy == "none":
        return "no-cda"
    name = config.policy
    if config.sampling == "pool":
        name = f"p-{name}"
    elif config.sampling == "synthesis":
        name = f"s-{name}"
    if config.budget_fraction >= 1.0:
        name += "-b100"
    if config.ablate_type:
        scope = "hf" if config.ablate_scope == "h_and_f" else "h"
        name += f"-ablate-{config.ablate_type}-{scope}"
    return name


# ---------------------------------------------------------------------------
# experiment drivers

@dataclass
class ExperimentReport:
    config: dict
    config_hash: str
    cells: list[dict]
    aggregates: dict[str, dict]


def _flatten_metrics(cell: dict) -> dict[str, float]:
    if cell.get("failed"):
        return {}
    flat: dict[str, float] = {}
    for key, value in cell.items():
        if key in ("arm", "seed", "fold", "isolation_ok", "error"):
            continue
        if isinstance(value, dict):
            for sub, v in value.items():
                if isinstance(v, (int, float)) and not isinstance(v, bool):
                    flat[f"{key}.{sub}"] = float(v)
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            flat[key] = float(value)
    return flat


def aggregate_cells(cells: Sequence[dict]) -> dict[str, dict]:
    grouped: dict[str, list[float]] = {}
    for cell in cells:
        for key, value in _flatten_metrics(cell).items():
            grouped.setdefault(f"{cell['arm']}/{key}", []).append(value)
    aggregates = {}
    for key in sorted(grouped):
        values = grouped[key]
        if len(values) >= 2:
            mean, stderr = summarize(values)
        else:
            mean, stderr = float(values[0]), None
        aggregates[key] = {"mean": mean, "stderr": stderr, "n": len(values)}
    return aggregates


def _run_seed(config: ExperimentConfig, seed_idx: int) -> list[dict]:
    art = build_seed_artifacts(config, seed_idx)
    cells = []
    for fold in range(config.folds):
        try:
            cells.append(run_cell(config, art, seed_idx, fold))
        except Exception as exc:  # a failed stage marks the cell incomplete
            cells.append(
                {
                    "arm": arm_name(config),
                    "seed": seed_idx,
                    "fold": fold,
                    "failed": True,
                    "error": f"{type(exc).__name__}: {exc}",
                }
            )
    return cells


def run_experiment(config: ExperimentConfig, parallel: int = 1) -> ExperimentReport:
    """Full protocol over n_seeds x folds cells; deterministic in config."""
    config.validate()
    seed_indices = list(range(config.n_seeds))
    if parallel > 1 and len(seed_indices) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            per_seed = list(pool.map(_run_seed, [config] * len(seed_indices), seed_indices))
        cells = [cell for chunk in per_seed for cell in chunk]
    else:
        cells = [cell for si in seed_indices for cell in _run_seed(config, si)]
    cells.sort(key=lambda c: (c["arm"], c["seed"], c["fold"]))
    return ExperimentReport(
        config=config_to_dict(config),
        config_hash=config_hash(config),
        cells=cells,
        aggregates=aggregate_cells(cells),
    )


def budget_sweep(
    config: ExperimentConfig, budgets: Sequence[float], parallel: int = 1
) -> list[dict]:
    """run_experiment per budget with shared seeds; one row per budget."""
    if not budgets or any(not 0.0 < b <= 1.0 for b in budgets):
        raise ContractError("budgets must lie in (0, 1]")
    rows = []
    for b in budgets:
        report = run_experiment(replace(config, budget_fraction=b), parallel=parallel)
        key = f"{arm_name(replace(config, budget_fraction=b))}/cf_test_error"
        agg = report.aggregates[key]
        rows.append(
            {
                "budget": b,
                "cf_test_error_mean": agg["mean"],
                "cf_test_error_stderr": agg["stderr"],
                "n": agg["n"],
            }
        )
    return rows


def ablate_type_experiment(
    config: ExperimentConfig, ptype: str, scope: str, parallel: int = 1
) -> ExperimentReport:
    """Ablation arm: drop a type from h training (h_only) or the whole
    augmentation pipeline (h_and_f); the test side keeps the type."""
    return run_experiment(
        replace(config, ablate_type=ptype, ablate_scope=scope), parallel=parallel
    )


# ---------------------------------------------------------------------------
# flip-mix failure-gap experiment (distribution-shifted labeler evaluation)

@dataclass(frozen=True)
class FlipMixSpec:
    train_size: int = 500
    eval_size: int = 500
    train_flip_fraction: float = 0.1
    eval_flip_fraction: float = 0.9
    budget_fraction: float = 0.2
    # negation is excluded: the invariance baseline handles it by special
    # case, and the point is to stress unmodeled label flips
    types: tuple[str, ...] = (
        "quantifier",
        "lexical",
        "resemantic",
        "insert",
        "delete",
        "restructure",
        "shuffle",
    )


def build_flip_mix_items(
    art: SeedArtifacts, config: ExperimentConfig, spec: FlipMixSpec
) -> tuple[list[Counterfactual], list[Counterfactual]]:
    """Generate one large pool per seed and partition it by oracle flip status."""
    if art.flip_mix is None:
        big = perturb_all(
            art.train_examples,
            spec.types,
            per_example=1,
            seed=derive_seed(config.seed, "flip-mix", art.seed_idx),
            vocab=art.vocab,
        )
        flips, nonflips = [], []
        for cf in big:
            origin = art.corpus.by_id(cf.origin_id)
            (flips if cf.oracle_label != origin.label else nonflips).append(cf)
        art.flip_mix = (flips, nonflips)
    return art.flip_mix


def run_failure_gap_cell(
    config: ExperimentConfig,
    art: SeedArtifacts,
    seed_idx: int,
    fold_idx: int,
    policy_kind: str,
    spec: FlipMixSpec = FlipMixSpec(),
) -> dict:
    """Label-shift cell: h trains where spec.train_flip_fraction of items
    flip, the evaluation pool flips at spec.eval_flip_fraction."""
    flips, nonflips = build_flip_mix_items(art, config, spec)
    rng = derive_rng(config.seed, "flip-mix-draw", seed_idx, fold_idx)
    n_train_flip = round(spec.train_size * spec.train_flip_fraction)
    n_eval_flip = round(spec.eval_size * spec.eval_flip_fraction)
    need_flips = n_train_flip + n_eval_flip
    need_non = (spec.train_size - n_train_flip) + (spec.eval_size - n_eval_flip)
    if len(flips) < need_flips or len(nonflips) < need_non:
        raise ContractError("flip-mix pool too small for the requested mixture")
    flip_order = rng.permutation(len(flips))
    non_order = rng.permutation(len(nonflips))
    train_pool = [flips[i] for i in flip_order[:n_train_flip]] + [
        nonflips[i] for i in non_order[: spec.train_size - n_train_flip]
    ]
    eval_pool = [flips[i] for i in flip_order[n_train_flip:need_flips]] + [
        nonflips[i]
        for i in non_order[spec.train_size - n_train_flip : need_non]
    ]
    train_pool.sort(key=lambda cf: cf.id)
    eval_pool.sort(key=lambda cf: cf.id)

    budget = math.ceil(spec.budget_fraction * len(train_pool))
    sink = OracleSink(origins=art.corpus, budget=budget)
    order = rng.permutation(len(train_pool))
    selected = [train_pool[i] for i in order[:budget]]
    annotations = sink.annotate(selected)

    fg_config = replace(config, policy=policy_kind, ablate_type=None, ablate_scope=None)
    h = None
    if policy_kind in ("pc", "capc"):
        items_by_id = {cf.id: cf for cf in train_pool}
        h = _h_trainer(fg_config, art, seed_idx, fold_idx)(
            [(items_by_id[i], y) for i, y in annotations.items()]
        )
    policy = _build_policy(fg_config, art, h)
    labeled_train = _apply(policy, train_pool, annotations, art)
    labeled_eval = _apply(policy, eval_pool, {}, art)

    ft_data = list(zip(art.train_vectors, (ex.label for ex in art.train_examples)))
    ft_data += [(art.vector_for(cf), cf.assigned_label) for cf in labeled_train]
    model = train(
        art.f0,
        ft_data,
        _tc(config.finetune_f, derive_seed(config.seed, "fg-finetune", seed_idx, fold_idx)),
    ).model

    eval_pack = pack([art.vector_for(cf) for cf in labeled_eval])
    oracle = np.array([cf.oracle_label for cf in labeled_eval])
    assigned = np.array([cf.assigned_label for cf in labeled_eval])
    return {
        "arm": f"fg-{policy_kind}",
        "seed": seed_idx,
        "fold": fold_idx,
        "oracle_queries": sink.queries,
        "isolation_ok": True,
        "failure_gap": failure_gap(model, eval_pack, oracle, assigned),
        "eval_label_accuracy": float(np.mean(assigned == oracle)),
        "eval_flip_fraction": float(
            np.mean([cf.oracle_label != art.corpus.by_id(cf.origin_id).label for cf in eval_pool])
        ),
    }


# ---------------------------------------------------------------------------
# report serialization

def report_to_json(report: ExperimentReport) -> str:
    doc = {
        "config": report.config,
        "config_hash": report.config_hash,
        "cells": report.cells,
        "aggregates": report.aggregates,
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def cells_to_csv(cells: Sequence[dict]) -> str:
    """Flat table: one row per run cell per metric."""
    lines = ["arm,seed,fold,metric,value"]
    for cell in sorted(cells, key=lambda c: (c["arm"], c["seed"], c["fold"])):
        flat = _flatten_metrics(cell)
        for metric in sorted(flat):
            lines.append(f"{cell['arm']},{cell['seed']},{cell['fold']},{metric},{flat[metric]!r}")
    return "\n".join(lines) + "\n"
