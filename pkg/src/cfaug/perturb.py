"""Rule-based counterfactual generation over grammar sentences.

Eight edit types, each operating on tagged tokens so the true label of
the result is always recomputable.  Edits that cannot apply to a given
sentence return :class:`Inapplicable` instead of falling back to a
different edit, which keeps per-type statistics honest.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, ContractError, EmptySliceError
from .grammar import (
    ADJECTIVE_TAGS,
    DEGREE_TAGS,
    Dataset,
    Example,
    Token,
    oracle_label,
    token,
    validate_sentence,
)
from .rngs import derive_rng

PERTURBATION_TYPES = (
    "negation",
    "quantifier",
    "lexical",
    "resemantic",
    "insert",
    "delete",
    "restructure",
    "shuffle",
)

UNLABELED = "unlabeled"


@dataclass(frozen=True)
class Inapplicable:
    """Typed non-result for edits that cannot apply to a sentence."""

    reason: str


@dataclass(frozen=True)
class Counterfactual:
    id: str
    origin_id: str
    type: str
    tokens: tuple[Token, ...]
    oracle_label: int  # held by the harness; policies must not read it
    assigned_label: int | None = None
    label_source: str = UNLABELED

    def __post_init__(self) -> None:
        if self.type not in PERTURBATION_TYPES:
            raise ConfigError(f"unknown perturbation type {self.type!r}")
        if (self.assigned_label is None) != (self.label_source == UNLABELED):
            raise ContractError(
                "assigned_label must be present exactly when label_source != unlabeled"
            )

    @property
    def text(self) -> str:
        return " ".join(t.surface for t in self.tokens)

    def with_label(self, label: int, source: str) -> "Counterfactual":
        return replace(self, assigned_label=label, label_source=source)


@dataclass
class CounterfactualPool:
    items: list[Counterfactual]

    @property
    def type_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for cf in self.items:
            counts[cf.type] = counts.get(cf.type, 0) + 1
        return counts

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


# ---------------------------------------------------------------------------
# slot geometry on a canonical-order sentence

def _indices(tokens: Sequence[Token], tags: frozenset[str]) -> list[int]:
    return [i for i, t in enumerate(tokens) if t.tags & tags]


def _slots(tokens: Sequence[Token]) -> dict[str, list[int]]:
    copulas = _indices(tokens, frozenset({"copula"}))
    adjective = _indices(tokens, ADJECTIVE_TAGS)
    modal = _indices(tokens, frozenset({"flipper-modal"})) + copulas[1:]
    return {
        "opening": _indices(tokens, frozenset({"opening"})),
        "copula": copulas[:1],
        "modal": sorted(modal),
        "negation": _indices(tokens, frozenset({"negation"})),
        "degree": _indices(tokens, DEGREE_TAGS),
        "adjective": adjective,
        "tail": _indices(tokens, frozenset({"tail"})),
    }


def _insert_at(tokens: Sequence[Token], pos: int, tok: Token) -> tuple[Token, ...]:
    out = list(tokens)
    out.insert(pos, tok)
    return tuple(out)


def _remove_at(tokens: Sequence[Token], pos: int) -> tuple[Token, ...]:
    out = list(tokens)
    del out[pos]
    return tuple(out)


def _replace_at(tokens: Sequence[Token], pos: int, tok: Token) -> tuple[Token, ...]:
    out = list(tokens)
    out[pos] = tok
    return tuple(out)


def _pre_adjective_pos(slots: dict[str, list[int]]) -> int:
    degree = slots["degree"]
    return min(degree) if degree else slots["adjective"][0]


def _post_modal_pos(slots: dict[str, list[int]]) -> int:
    if slots["modal"]:
        return max(slots["modal"]) + 1
    return slots["copula"][0] + 1


# ---------------------------------------------------------------------------
# edit rules

def _pool(vocab: Mapping[str, tuple[str, ...]], roles: Iterable[str]) -> list[Token]:
    return [token(s, role) for role in roles for s in vocab[role]]


def _edit_negation(tokens, slots, rng, vocab):
    if slots["negation"]:
        return _remove_at(tokens, slots["negation"][0])
    form = vocab["negation"][rng.integers(len(vocab["negation"]))]
    return _insert_at(tokens, _pre_adjective_pos(slots), token(form, "negation"))


def _edit_quantifier(tokens, slots, rng, vocab):
    pool = _pool(vocab, ("intensifier", "neutral-degree", "flipper-degree"))
    if slots["degree"]:
        pos = slots["degree"][rng.integers(len(slots["degree"]))]
        options = [t for t in pool if t.surface != tokens[pos].surface]
        return _replace_at(tokens, pos, options[rng.integers(len(options))])
    return _insert_at(tokens, _pre_adjective_pos(slots), pool[rng.integers(len(pool))])


def _edit_lexical(tokens, slots, rng, vocab):
    pos = slots["adjective"][0]
    pool = _pool(vocab, ("adjective-pos", "adjective-neg"))
    options = [t for t in pool if t.surface != tokens[pos].surface]
    return _replace_at(tokens, pos, options[rng.integers(len(options))])


def _edit_resemantic(tokens, slots, rng, vocab):
    flippers = [i for i in slots["modal"] if "flipper-modal" in tokens[i].tags]
    neutrals = [i for i in slots["modal"] if "flipper-modal" not in tokens[i].tags]
    if flippers:
        form = vocab["modal-neutral"][rng.integers(len(vocab["modal-neutral"]))]
        return _replace_at(tokens, flippers[0], token(form, "modal-neutral"))
    if neutrals:
        form = vocab["flipper-modal"][rng.integers(len(vocab["flipper-modal"]))]
        return _replace_at(tokens, neutrals[0], token(form, "flipper-modal"))
    role = "modal-neutral" if rng.random() < 0.5 else "flipper-modal"
    form = vocab[role][rng.integers(len(vocab[role]))]
    return _insert_at(tokens, _post_modal_pos(slots), token(form, role))


def _edit_insert(tokens, slots, rng, vocab):
    if rng.random() < 0.5:
        form = vocab["intensifier"][rng.integers(len(vocab["intensifier"]))]
        return _insert_at(tokens, slots["adjective"][0], token(form, "intensifier"))
    form = vocab["flipper-modal"][rng.integers(len(vocab["flipper-modal"]))]
    return _insert_at(tokens, _post_modal_pos(slots), token(form, "flipper-modal"))


def _edit_delete(tokens, slots, rng, vocab):
    optional = slots["degree"] + slots["modal"] + slots["negation"]
    if not optional:
        return Inapplicable("no optional degree/modal/negation token to delete")
    optional = sorted(optional)
    return _remove_at(tokens, optional[rng.integers(len(optional))])


def _edit_restructure(tokens, slots, rng, vocab):
    # subject-postposed template: "is not very great the movie"; keeps
    # every copula/negation/degree/adjective adjacency intact
    order = (
        slots["opening"]
        + slots["copula"]
        + slots["modal"]
        + slots["negation"]
        + slots["degree"]
        + slots["adjective"]
        + [i for i, t in enumerate(tokens) if "subject" in t.tags]
        + slots["tail"]
    )
    reordered = tuple(tokens[i] for i in order)
    if reordered == tuple(tokens):
        return Inapplicable("restructured order equals original order")
    return reordered


def _edit_shuffle(tokens, slots, rng, vocab):
    opening = slots["opening"]
    tail = slots["tail"]
    if not opening and not tail:
        return Inapplicable("no opening or tail segment to move")
    middle = [
        t for i, t in enumerate(tokens) if i not in set(opening) | set(tail)
    ]
    swapped = tuple(
        [tokens[i] for i in tail] + middle + [tokens[i] for i in opening]
    )
    if swapped == tuple(tokens):
        return Inapplicable("swap produced an identical sentence")
    return swapped


_EDITS = {
    "negation": _edit_negation,
    "quantifier": _edit_quantifier,
    "lexical": _edit_lexical,
    "resemantic": _edit_resemantic,
    "insert": _edit_insert,
    "delete": _edit_delete,
    "restructure": _edit_restructure,
    "shuffle": _edit_shuffle,
}


# ---------------------------------------------------------------------------
# public operations

def perturb(
    example: Example,
    ptype: str,
    rng,
    vocab: Mapping[str, tuple[str, ...]],
) -> Counterfactual | Inapplicable:
    """Apply one edit of the given type; Inapplicable when the sentence lacks it."""
    if ptype not in PERTURBATION_TYPES:
        raise ConfigError(f"unknown perturbation type {ptype!r}")
    validate_sentence(example.tokens)
    result = _EDITS[ptype](example.tokens, _slots(example.tokens), rng, vocab)
    if isinstance(result, Inapplicable):
        return result
    if result == example.tokens:
        return Inapplicable("edit produced an identical sentence")
    validate_sentence(result)
    return Counterfactual(
        id=f"{example.id}/{ptype}-0",
        origin_id=example.id,
        type=ptype,
        tokens=result,
        oracle_label=oracle_label(result),
    )


def perturb_all(
    examples: Iterable[Example],
    types: Sequence[str],
    per_example: int,
    seed: int,
    vocab: Mapping[str, tuple[str, ...]],
    id_suffix: str = "",
) -> CounterfactualPool:
    """Up to per_example distinct counterfactuals per (example, type).

    Deduplicated pool-wide by (origin_id, token sequence); each
    (example, type) cell draws from its own random stream so the result
    does not depend on iteration order.
    """
    if not types:
        raise ConfigError("perturb_all requires a nonempty type set")
    if per_example < 1:
        raise ConfigError("per_example must be >= 1")
    for t in types:
        if t not in PERTURBATION_TYPES:
            raise ConfigError(f"unknown perturbation type {t!r}")
    items: list[Counterfactual] = []
    seen: set[tuple[str, tuple[Token, ...]]] = set()
    for ex in examples:
        for ptype in types:
            rng = derive_rng(seed, "perturb", ex.id, ptype)
            emitted = 0
            for _ in range(per_example * 6):
                if emitted >= per_example:
                    break
                result = _EDITS[ptype](ex.tokens, _slots(ex.tokens), rng, vocab)
                if isinstance(result, Inapplicable):
                    break  # inapplicability is a property of the sentence
                if result == ex.tokens:
                    continue
                key = (ex.id, result)
                if key in seen:
                    continue
                seen.add(key)
                validate_sentence(result)
                items.append(
                    Counterfactual(
                        id=f"{ex.id}/{ptype}-{id_suffix}{emitted}",
                        origin_id=ex.id,
                        type=ptype,
                        tokens=result,
                        oracle_label=oracle_label(result),
                    )
                )
                emitted += 1
    return CounterfactualPool(items)


def measured_flip_rate(
    pool: CounterfactualPool | Sequence[Counterfactual],
    ptype: str,
    origins: Dataset | Mapping[str, int],
) -> float:
    """Fraction of a type slice whose oracle label differs from its origin's."""
    label_of = (
        origins.__getitem__
        if isinstance(origins, Mapping)
        else (lambda i: origins.by_id(i).label)
    )
    slice_items = [cf for cf in pool if cf.type == ptype]
    if not slice_items:
        raise EmptySliceError(f"no counterfactuals of type {ptype!r} in pool")
    flips = sum(1 for cf in slice_items if cf.oracle_label != label_of(cf.origin_id))
    return flips / len(slice_items)


# ---------------------------------------------------------------------------
# serialization: pool records never carry oracle labels; those live in a
# sidecar file so labeling policies cannot accidentally read them.

def pool_record(cf: Counterfactual) -> dict:
    return {
        "id": cf.id,
        "origin_id": cf.origin_id,
        "type": cf.type,
        "text": cf.text,
        "tokens": [{"surface": t.surface, "tags": sorted(t.tags)} for t in cf.tokens],
        "label": cf.assigned_label,
        "label_source": cf.label_source,
    }


def pool_to_jsonl(items: Iterable[Counterfactual]) -> str:
    lines = [
        json.dumps(pool_record(cf), ensure_ascii=False, separators=(",", ":"))
        for cf in items
    ]
    return "\n".join(lines) + "\n" if lines else ""


def sidecar_to_jsonl(items: Iterable[Counterfactual]) -> str:
    lines = [
        json.dumps({"id": cf.id, "oracle_label": cf.oracle_label}, separators=(",", ":"))
        for cf in items
    ]
    return "\n".join(lines) + "\n" if lines else ""


def pool_from_jsonl(text: str, sidecar_text: str | None = None) -> list[Counterfactual]:
    oracle: dict[str, int] = {}
    if sidecar_text:
        for line in sidecar_text.splitlines():
            if line:
                rec = json.loads(line)
                oracle[rec["id"]] = rec["oracle_label"]
    items = []
    for line in text.splitlines():
        if not line:
            continue
        rec = json.loads(line)
        tokens = tuple(Token(t["surface"], frozenset(t["tags"])) for t in rec["tokens"])
        items.append(
            Counterfactual(
                id=rec["id"],
                origin_id=rec["origin_id"],
                type=rec["type"],
                tokens=tokens,
                oracle_label=oracle.get(rec["id"], oracle_label(tokens)),
                assigned_label=rec["label"],
                label_source=rec["label_source"],
            )
        )
    return items
