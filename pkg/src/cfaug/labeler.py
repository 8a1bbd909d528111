"""Counterfactual labeling policies.

Baseline policies (label-invariance, trusting the base classifier,
confidence-weighted trust, random sentence pairs, keep-annotated-only)
and the learned pairwise labelers: PC predicts the counterfactual label
from (original, counterfactual, original label); CAPC additionally sees
the base classifier's probabilities on both sentences.

Argmax ties break to class 0 everywhere so policies stay comparable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, ContractError
from .features import CAPC, PC, FeaturizerConfig, SparseVector, encode_pair, featurize, pair_dimension
from .grammar import Dataset, Example
from .neuralnet import (
    Model,
    ModelConfig,
    TrainConfig,
    forward,
    forward_packed,
    init_model,
    pack,
    predict_labels,
    train,
)
from .perturb import Counterfactual
from .rngs import derive_rng, derive_seed

POLICY_KINDS = ("invariant", "trust", "wtrust", "random_pair", "training_only", "pc", "capc")

ORACLE = "oracle"
HUMAN = "human"
ANNOTATED_SOURCES = frozenset({ORACLE, HUMAN})


def policy_source(kind: str) -> str:
    return f"policy:{kind}"


@dataclass(frozen=True)
class PairwiseClassifier:
    model: Model
    mode: str
    featurizer: FeaturizerConfig

    def __post_init__(self) -> None:
        expected = pair_dimension(self.featurizer.dimension, self.mode)
        if self.model.config.input_dim != expected:
            raise ContractError(
                f"pairwise model input_dim {self.model.config.input_dim} != {expected} for {self.mode}"
            )


@dataclass(frozen=True)
class LabelingPolicy:
    kind: str
    model: PairwiseClassifier | None = None
    base: Model | None = None
    featurizer: FeaturizerConfig | None = None

    def __post_init__(self) -> None:
        if self.kind not in POLICY_KINDS:
            raise ConfigError(f"unknown policy kind {self.kind!r}")
        if self.kind in ("pc", "capc", "random_pair") and self.model is None:
            raise ContractError(f"policy {self.kind!r} requires a pairwise model")
        if self.kind in ("trust", "wtrust") and (self.base is None or self.featurizer is None):
            raise ContractError(f"policy {self.kind!r} requires the base classifier")
        if self.kind == "capc" and self.base is None:
            raise ContractError("capc labeling requires the base classifier for its probability blocks")


def _argmax_tie_low(p: np.ndarray) -> int:
    return 0 if p[0] >= p[1] else 1


def label_invariant(cf: Counterfactual, y: int) -> int:
    """Assume the origin label carries over; negation edits are the opposite."""
    return 1 - y if cf.type == "negation" else y


def label_trust(f: Model, cf: Counterfactual, featurizer: FeaturizerConfig) -> int:
    return _argmax_tie_low(forward(f, featurize(cf.tokens, featurizer)))


def label_wtrust(f: Model, x: Example, cf: Counterfactual, featurizer: FeaturizerConfig) -> int:
    p_x = forward(f, featurize(x.tokens, featurizer))
    p_cx = forward(f, featurize(cf.tokens, featurizer))
    return _argmax_tie_low(p_x * p_cx)


@dataclass(frozen=True)
class AnnotatedPair:
    origin: Example
    cf: Counterfactual
    label: int
    source: str = ORACLE


def _encode_pair_input(
    origin: Example,
    cf: Counterfactual,
    mode: str,
    featurizer: FeaturizerConfig,
    f: Model | None,
    y: int | None = None,
) -> SparseVector:
    x_vec = featurize(origin.tokens, featurizer)
    cx_vec = featurize(cf.tokens, featurizer)
    if mode == CAPC:
        if f is None:
            raise ContractError("CAPC encoding requires the base classifier")
        f_probs = (forward(f, x_vec), forward(f, cx_vec))
    else:
        f_probs = None
    return encode_pair(x_vec, cx_vec, origin.label if y is None else y, mode, f_probs)


def train_pairwise(
    annotated: Sequence[AnnotatedPair],
    mode: str,
    tc: TrainConfig,
    featurizer: FeaturizerConfig,
    f: Model | None = None,
    hidden_dim: int = 64,
    dropout_rate: float = 0.5,
    warm_start: Model | None = None,
) -> PairwiseClassifier:
    """Fit the pairwise labeler on annotated (x, c(x), y) -> y' pairs.

    Training labels must all come from the oracle/human source; policy
    labels are rejected so the labeler can never train on itself.

    With ``warm_start`` the model is initialized so that at step 0 it
    reproduces the warm-start classifier applied to the counterfactual
    block, h(x, c(x), y) == f(c(x)); fine-tuning then learns pairwise
    corrections on top.  This mirrors starting the pairwise model from
    a trained task checkpoint instead of random weights.
    """
    if not annotated:
        raise ContractError("cannot train a pairwise classifier on an empty set")
    bad = sorted({p.source for p in annotated} - ANNOTATED_SOURCES)
    if bad:
        raise ContractError(f"pairwise training labels must be oracle/human, got {bad}")
    if mode not in (PC, CAPC):
        raise ConfigError(f"unknown pairwise mode {mode!r}")
    config = ModelConfig(
        input_dim=pair_dimension(featurizer.dimension, mode),
        hidden_dim=hidden_dim,
        dropout_rate=dropout_rate,
    )
    model = init_model(config, derive_seed(tc.seed, "pairwise-init"))
    if warm_start is not None:
        d = featurizer.dimension
        if warm_start.config.input_dim != d:
            raise ContractError("warm-start model must share the sentence featurizer dimension")
        if warm_start.config.hidden_dim != hidden_dim:
            raise ContractError("warm-start model must share hidden_dim")
        model.W1[:, :] = 0.0
        model.W1[:, d : 2 * d] = warm_start.W1
        model.b1[:] = warm_start.b1
        model.W2[:, :] = warm_start.W2
        model.b2[:] = warm_start.b2
    data = [
        (_encode_pair_input(p.origin, p.cf, mode, featurizer, f), p.label)
        for p in annotated
    ]
    result = train(model, data, tc)
    return PairwiseClassifier(result.model, mode, featurizer)


def pair_encoder(
    mode: str,
    featurizer: FeaturizerConfig,
    origins: Dataset,
    f: Model | None = None,
):
    """Counterfactual -> pair-encoded SparseVector, resolving origins by id."""

    def encode(cf: Counterfactual) -> SparseVector:
        return _encode_pair_input(origins.by_id(cf.origin_id), cf, mode, featurizer, f)

    return encode


def label_pairwise(
    h: PairwiseClassifier,
    x: Example,
    cf: Counterfactual,
    y: int,
    f: Model | None = None,
) -> int:
    if (h.mode == CAPC) != (f is not None):
        raise ContractError("base classifier must be passed exactly for CAPC mode")
    vec = _encode_pair_input(x, cf, h.mode, h.featurizer, f, y=y)
    return _argmax_tie_low(forward(h.model, vec))


def make_random_pair_policy(
    examples: Sequence[Example] | Dataset,
    n_pairs: int,
    tc: TrainConfig,
    featurizer: FeaturizerConfig,
    hidden_dim: int = 64,
    dropout_rate: float = 0.5,
) -> PairwiseClassifier:
    """Control labeler: random sentence pairs (x_i, x_j, y_i) -> y_j.

    Same architecture and training budget as PC, but the second sentence
    is not a counterfactual of the first, so any PC advantage over this
    policy is attributable to the counterfactual pairing itself.
    """
    pool = list(examples)
    if len(pool) < 2:
        raise ContractError("random pairs need at least 2 examples")
    if n_pairs < 1:
        raise ContractError("n_pairs must be >= 1")
    rng = derive_rng(tc.seed, "random-pairs")
    data = []
    for _ in range(n_pairs):
        i = int(rng.integers(len(pool)))
        j = int(rng.integers(len(pool) - 1))
        if j >= i:
            j += 1
        vec = encode_pair(
            featurize(pool[i].tokens, featurizer),
            featurize(pool[j].tokens, featurizer),
            pool[i].label,
            PC,
        )
        data.append((vec, pool[j].label))
    config = ModelConfig(
        input_dim=pair_dimension(featurizer.dimension, PC),
        hidden_dim=hidden_dim,
        dropout_rate=dropout_rate,
    )
    model = init_model(config, derive_seed(tc.seed, "pairwise-init"))
    result = train(model, data, tc)
    return PairwiseClassifier(result.model, PC, featurizer)


def apply_policy(
    policy: LabelingPolicy,
    items: Sequence[Counterfactual],
    annotated: Mapping[str, int],
    origins: Dataset,
    annotated_source: str = ORACLE,
) -> list[Counterfactual]:
    """Label a pool: annotated items keep their oracle/human labels, the
    rest get policy labels.  training_only instead drops the rest."""
    if annotated_source not in ANNOTATED_SOURCES:
        raise ContractError(f"annotated_source must be oracle/human, got {annotated_source!r}")
    pool_ids = {cf.id for cf in items}
    missing = sorted(i for i in annotated if i not in pool_ids)
    if missing:
        raise ContractError(f"annotated ids not in pool: {missing[:3]}")
    if policy.kind == "training_only":
        return [
            cf.with_label(annotated[cf.id], annotated_source)
            for cf in items
            if cf.id in annotated
        ]

    labeled: list[Counterfactual] = []
    rest = [cf for cf in items if cf.id not in annotated]
    rest_labels = _policy_labels(policy, rest, origins) if rest else []
    rest_iter = iter(rest_labels)
    source = policy_source(policy.kind)
    for cf in items:
        if cf.id in annotated:
            labeled.append(cf.with_label(annotated[cf.id], annotated_source))
        else:
            labeled.append(cf.with_label(next(rest_iter), source))
    return labeled


def _policy_labels(
    policy: LabelingPolicy, items: Sequence[Counterfactual], origins: Dataset
) -> list[int]:
    kind = policy.kind
    if kind == "invariant":
        return [label_invariant(cf, origins.by_id(cf.origin_id).label) for cf in items]
    if kind == "trust":
        packed = pack([featurize(cf.tokens, policy.featurizer) for cf in items])
        return [int(v) for v in predict_labels(policy.base, packed)]
    if kind == "wtrust":
        fz = policy.featurizer
        p_x = forward_packed(
            policy.base, pack([featurize(origins.by_id(cf.origin_id).tokens, fz) for cf in items])
        )
        p_cx = forward_packed(policy.base, pack([featurize(cf.tokens, fz) for cf in items]))
        prod = p_x * p_cx
        return [0 if row[0] >= row[1] else 1 for row in prod]
    if kind in ("pc", "capc", "random_pair"):
        h = policy.model
        f = policy.base if h.mode == CAPC else None
        vecs = [
            _encode_pair_input(origins.by_id(cf.origin_id), cf, h.mode, h.featurizer, f)
            for cf in items
        ]
        return [int(v) for v in predict_labels(h.model, pack(vecs))]
    raise ContractError(f"policy {kind!r} cannot label items")
