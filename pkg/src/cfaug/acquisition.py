"""Uncertainty scoring and active selection.

BALD is mutual information between the prediction and the model
parameters, estimated with MC dropout: entropy of the mean predictive
distribution minus the mean per-pass entropy.  Selection is pool-based
(score a fixed pool once) or synthesis-based (iteratively generate from
low-uncertainty regions, annotate the most uncertain, retrain).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from .errors import AnnotationRefusedError, ConfigError, ContractError
from .features import FeaturizerConfig, SparseVector, featurize
from .grammar import Dataset
from .neuralnet import Model, mc_probs_packed, pack
from .perturb import Counterfactual, perturb_all
from .rngs import derive_seed

LN2 = math.log(2.0)


@dataclass(frozen=True)
class AcquisitionScore:
    item_id: str
    predictive_entropy: float
    expected_entropy: float
    bald: float


def entropy(p: Sequence[float] | np.ndarray) -> float:
    """Shannon entropy in nats, with 0 * ln 0 := 0."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1 or len(arr) < 2:
        raise ContractError("entropy expects a probability vector")
    if np.any(arr < -1e-12) or abs(float(arr.sum()) - 1.0) > 1e-9:
        raise ContractError(f"not a probability distribution: {arr}")
    pos = arr[arr > 0.0]
    return float(-(pos * np.log(pos)).sum())


def bald_score(
    mc_probs: Sequence[np.ndarray] | np.ndarray, item_id: str = ""
) -> AcquisitionScore:
    """Predictive entropy, expected entropy and their difference."""
    arr = np.asarray(mc_probs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ContractError("bald_score expects a nonempty list of probability vectors")
    if np.all(arr == arr[0]):
        # bit-identical passes carry exactly zero disagreement; avoid
        # 1-ulp mean noise so downstream ties break on item ids
        e = entropy(arr[0])
        return AcquisitionScore(
            item_id=item_id, predictive_entropy=e, expected_entropy=e, bald=0.0
        )
    predictive = entropy(arr.mean(axis=0))
    expected = float(np.mean([entropy(row) for row in arr]))
    return AcquisitionScore(
        item_id=item_id,
        predictive_entropy=predictive,
        expected_entropy=expected,
        bald=predictive - expected,
    )


class Scorer(Protocol):
    def mc_probs(self, items: Sequence[Counterfactual], T: int, seed: int) -> np.ndarray: ...


@dataclass
class ModelScorer:
    """MC-dropout scorer: model posterior over encoder(item) inputs.

    Mask streams derive from (seed, item id), so scores do not depend on
    pool ordering.
    """

    model: Model
    encode: Callable[[Counterfactual], SparseVector]

    def mc_probs(self, items: Sequence[Counterfactual], T: int, seed: int) -> np.ndarray:
        packed = pack([self.encode(cf) for cf in items])
        seeds = [derive_seed(seed, cf.id) for cf in items]
        return mc_probs_packed(self.model, packed, T, seeds)


def sentence_scorer(model: Model, featurizer: FeaturizerConfig) -> ModelScorer:
    """Scores a counterfactual with the base classifier on its text alone
    (the only posterior available before any pairwise model exists)."""
    return ModelScorer(model, lambda cf: featurize(cf.tokens, featurizer))


def score_pool(
    items: Sequence[Counterfactual], scorer: Scorer, T: int, seed: int
) -> list[AcquisitionScore]:
    if not items:
        return []
    probs = scorer.mc_probs(items, T, seed)
    return [bald_score(probs[i], item_id=cf.id) for i, cf in enumerate(items)]


def _ranked(scores: Sequence[AcquisitionScore]) -> list[AcquisitionScore]:
    return sorted(scores, key=lambda s: (-s.bald, s.item_id))


@dataclass
class PoolSelection:
    ranked_ids: list[str]
    scores: list[AcquisitionScore]  # whole pool, descending bald


def pool_select(
    items: Sequence[Counterfactual], scorer: Scorer, k: int, T: int, seed: int
) -> PoolSelection:
    """Top-k pool items by BALD, ties broken by item id."""
    if k < 1 or k > len(items):
        raise ContractError(f"k={k} out of range for pool of {len(items)}")
    ordered = _ranked(score_pool(items, scorer, T, seed))
    return PoolSelection([s.item_id for s in ordered[:k]], ordered)


class AnnotationSink(Protocol):
    def annotate(self, items: Sequence[Counterfactual]) -> dict[str, int]: ...


@dataclass
class SynthesisResult:
    annotations: dict[str, int]
    pool: list[Counterfactual]
    scores_log: list[tuple[int, AcquisitionScore]] = field(default_factory=list)
    model: object | None = None
    aborted: bool = False


def synthesize_loop(
    pool: Sequence[Counterfactual],
    origins: Dataset,
    vocab: Mapping[str, tuple[str, ...]],
    types: Sequence[str],
    initial_scorer: Scorer,
    retrain: Callable[[Sequence[tuple[Counterfactual, int]]], tuple[Scorer, object]],
    rounds: int,
    batch: int,
    sink: AnnotationSink,
    T: int,
    seed: int,
    per_origin: int = 1,
) -> SynthesisResult:
    """Generate-score-annotate-retrain loop.

    Each round: seed fresh generation from the lowest-uncertainty decile
    of the current pool, rescore everything unlabeled, send the top
    ``batch`` items to the annotation sink, and retrain the pairwise
    model on all annotations so far.  Exactly rounds * batch sink
    queries when the sink cooperates; a refusing sink aborts the loop
    with partial results preserved.
    """
    if rounds < 1 or batch < 1:
        raise ContractError("rounds and batch must be >= 1")
    items = list(pool)
    keys = {(cf.origin_id, cf.tokens) for cf in items}
    annotations: dict[str, int] = {}
    annotated_items: list[tuple[Counterfactual, int]] = []
    scores_log: list[tuple[int, AcquisitionScore]] = []
    scorer: Scorer = initial_scorer
    model: object | None = None
    scores = _ranked(score_pool(items, scorer, T, derive_seed(seed, "score", 0)))

    for r in range(1, rounds + 1):
        decile = max(1, math.ceil(len(scores) / 10))
        low = sorted(scores, key=lambda s: (s.bald, s.item_id))[:decile]
        by_id = {cf.id: cf for cf in items}
        seed_origins = sorted({by_id[s.item_id].origin_id for s in low})
        fresh = perturb_all(
            [origins.by_id(i) for i in seed_origins],
            types,
            per_example=per_origin,
            seed=derive_seed(seed, "gen", r),
            vocab=vocab,
            id_suffix=f"g{r}-",
        )
        for cf in fresh:
            key = (cf.origin_id, cf.tokens)
            if key not in keys:
                keys.add(key)
                items.append(cf)

        unlabeled = [cf for cf in items if cf.id not in annotations]
        if len(unlabeled) < batch:
            raise ContractError("pool exhausted: fewer unlabeled items than batch size")
        scores = _ranked(score_pool(unlabeled, scorer, T, derive_seed(seed, "score", r)))
        scores_log.extend((r, s) for s in scores)
        unlabeled_by_id = {cf.id: cf for cf in unlabeled}
        chosen = [unlabeled_by_id[s.item_id] for s in scores[:batch]]
        try:
            labels = sink.annotate(chosen)
        except AnnotationRefusedError:
            return SynthesisResult(annotations, items, scores_log, model, aborted=True)
        annotations.update(labels)
        annotated_items.extend((cf, labels[cf.id]) for cf in chosen)
        scorer, model = retrain(annotated_items)
        scores = [s for s in scores if s.item_id not in annotations]

    return SynthesisResult(annotations, items, scores_log, model)


def scores_to_csv(rows: Sequence[tuple[int, AcquisitionScore]]) -> str:
    """CSV dump: item_id, predictive_entropy, expected_entropy, bald, round."""
    lines = ["item_id,predictive_entropy,expected_entropy,bald,round"]
    for rnd, s in rows:
        lines.append(
            f"{s.item_id},{s.predictive_entropy!r},{s.expected_entropy!r},{s.bald!r},{rnd}"
        )
    return "\n".join(lines) + "\n"
