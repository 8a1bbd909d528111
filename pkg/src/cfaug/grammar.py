"""Synthetic review corpus with rule-computable labels.

Sentences follow the template

    [Opening] Subject Copula [Modal] [Negation] [Degree] Adjective [Tail]

and the label is the adjective's polarity XOR'd with the parity of
label-flipping tokens (negation, flipper-modal like "supposed to be",
flipper-degree like "hardly").  Because the label is a pure function of
token tags, the true label of any tag-preserving or tag-editing
perturbation is recomputable, which is what makes every labeling policy
in this package exactly scoreable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

from .errors import ConfigError, MalformedSentenceError
from .rngs import derive_rng

TAGS = frozenset(
    {
        "subject",
        "copula",
        "adjective-pos",
        "adjective-neg",
        "intensifier",
        "flipper-modal",
        "flipper-degree",
        "neutral-degree",
        "opening",
        "tail",
        "negation",
    }
)

ADJECTIVE_TAGS = frozenset({"adjective-pos", "adjective-neg"})
FLIP_TAGS = frozenset({"negation", "flipper-modal", "flipper-degree"})
DEGREE_TAGS = frozenset({"intensifier", "neutral-degree", "flipper-degree"})

DOMAINS = ("in-domain", "ood-vocab", "ood-style")

# Lexicon roles. Each role maps to the tag set its tokens carry; the
# "modal-neutral" role reuses the copula tag because a neutral copula
# extension ("certain to be") never changes the label.
ROLE_TAGS: Mapping[str, frozenset[str]] = {
    "opening": frozenset({"opening"}),
    "subject": frozenset({"subject"}),
    "copula": frozenset({"copula"}),
    "modal-neutral": frozenset({"copula"}),
    "flipper-modal": frozenset({"flipper-modal"}),
    "negation": frozenset({"negation"}),
    "intensifier": frozenset({"intensifier"}),
    "neutral-degree": frozenset({"neutral-degree"}),
    "flipper-degree": frozenset({"flipper-degree"}),
    "adjective-pos": frozenset({"adjective-pos"}),
    "adjective-neg": frozenset({"adjective-neg"}),
    "tail": frozenset({"tail"}),
}

OPTIONAL_SLOTS = ("opening", "modal", "negation", "degree", "tail")


@dataclass(frozen=True)
class Token:
    surface: str
    tags: frozenset[str]

    def __post_init__(self) -> None:
        if not self.tags:
            raise ConfigError(f"token {self.surface!r} has no tags")
        unknown = self.tags - TAGS
        if unknown:
            raise ConfigError(f"token {self.surface!r} has unknown tags {sorted(unknown)}")
        if (self.tags & FLIP_TAGS) and (self.tags & ADJECTIVE_TAGS):
            raise ConfigError(
                f"token {self.surface!r}: negation/flipper tags exclude adjective tags"
            )


def token(surface: str, role: str) -> Token:
    return Token(surface, ROLE_TAGS[role])


@dataclass(frozen=True)
class Example:
    id: str
    tokens: tuple[Token, ...]
    label: int
    split: str

    @property
    def text(self) -> str:
        return " ".join(t.surface for t in self.tokens)


@dataclass(frozen=True)
class GrammarConfig:
    vocab: Mapping[str, tuple[str, ...]]
    slot_probabilities: Mapping[str, float]
    n_examples: int
    seed: int
    domain: str = "in-domain"
    train_fraction: float = 0.8


@dataclass
class Dataset:
    examples: list[Example]
    _index: dict[str, Example] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._index = {ex.id: ex for ex in self.examples}
        if len(self._index) != len(self.examples):
            raise ConfigError("duplicate example ids in dataset")

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)

    def by_id(self, example_id: str) -> Example:
        return self._index[example_id]

    def split(self, name: str) -> list[Example]:
        return [ex for ex in self.examples if ex.split == name]


# ---------------------------------------------------------------------------
# default lexicons

_IN_DOMAIN_VOCAB: dict[str, tuple[str, ...]] = {
    "opening": ("honestly", "frankly", "in short", "to be fair", "all in all", "critics agree"),
    "subject": (
        "the movie",
        "the film",
        "the plot",
        "the acting",
        "the script",
        "the cast",
        "the soundtrack",
        "the director's cut",
        "the sequel",
        "the ending",
        "the dialogue",
        "the cinematography",
    ),
    "copula": ("is", "was"),
    "modal-neutral": ("certain to be", "sure to be"),
    "flipper-modal": ("supposed to be", "meant to be"),
    "negation": ("not", "never"),
    "intensifier": ("very", "really", "truly", "extremely"),
    "neutral-degree": ("quite", "rather", "somewhat"),
    "flipper-degree": ("hardly", "barely"),
    "adjective-pos": (
        "great",
        "fantastic",
        "brilliant",
        "superb",
        "delightful",
        "excellent",
        "wonderful",
        "charming",
    ),
    "adjective-neg": (
        "terrible",
        "awful",
        "boring",
        "dreadful",
        "bland",
        "mediocre",
        "disappointing",
        "tedious",
    ),
    "tail": (
        "overall",
        "in the end",
        "to say the least",
        "by any measure",
        "without question",
        "for sure",
    ),
}

# Disjoint subject/opening/tail surfaces; shared semantics-bearing tokens.
_OOD_VOCAB_OVERRIDES: dict[str, tuple[str, ...]] = {
    "opening": (
        "to begin with",
        "on balance",
        "truth be told",
        "by most accounts",
        "as reviews go",
        "put simply",
    ),
    "subject": (
        "the restaurant",
        "the cafe",
        "the novel",
        "the album",
        "the service",
        "the staff",
        "the menu",
        "the hotel",
        "the gadget",
        "the concert",
        "the recipe",
        "the museum",
    ),
    "tail": (
        "on the whole",
        "at closing time",
        "per the reviews",
        "like it or not",
        "no doubt about it",
        "when all is said",
    ),
}

_IN_DOMAIN_SLOTS: dict[str, float] = {
    "opening": 0.5,
    "modal": 0.06,
    "negation": 0.07,
    "degree": 0.25,
    "tail": 0.5,
}

# Terser, flip-heavy style: same vocabulary, shifted slot usage.
_OOD_STYLE_SLOTS: dict[str, float] = {
    "opening": 0.15,
    "modal": 0.30,
    "negation": 0.30,
    "degree": 0.55,
    "tail": 0.15,
}


def default_vocab(domain: str = "in-domain") -> dict[str, tuple[str, ...]]:
    vocab = dict(_IN_DOMAIN_VOCAB)
    if domain == "ood-vocab":
        vocab.update(_OOD_VOCAB_OVERRIDES)
    return vocab


def default_slot_probabilities(domain: str = "in-domain") -> dict[str, float]:
    if domain == "ood-style":
        return dict(_OOD_STYLE_SLOTS)
    return dict(_IN_DOMAIN_SLOTS)


def default_grammar_config(
    n_examples: int,
    seed: int,
    domain: str = "in-domain",
    train_fraction: float = 0.8,
) -> GrammarConfig:
    if domain not in DOMAINS:
        raise ConfigError(f"unknown domain {domain!r}")
    return GrammarConfig(
        vocab=default_vocab(domain),
        slot_probabilities=default_slot_probabilities(domain),
        n_examples=n_examples,
        seed=seed,
        domain=domain,
        train_fraction=train_fraction,
    )


def validate_config(config: GrammarConfig) -> None:
    if config.domain not in DOMAINS:
        raise ConfigError(f"unknown domain {config.domain!r}")
    if config.n_examples < 1:
        raise ConfigError("n_examples must be >= 1")
    if not 0.0 <= config.train_fraction <= 1.0:
        raise ConfigError("train_fraction must be in [0, 1]")
    for role in ROLE_TAGS:
        forms = config.vocab.get(role, ())
        if len(forms) < 2:
            raise ConfigError(f"lexicon role {role!r} needs at least 2 surface forms")
        if len(set(forms)) != len(forms):
            raise ConfigError(f"lexicon role {role!r} has duplicate surface forms")
    for slot in OPTIONAL_SLOTS:
        p = config.slot_probabilities.get(slot)
        if p is None or not 0.0 <= p <= 1.0:
            raise ConfigError(f"slot probability for {slot!r} must be in [0, 1]")


# ---------------------------------------------------------------------------
# label semantics

def oracle_label(tokens: Sequence[Token]) -> int:
    """Polarity of the single adjective, flipped once per flipper token."""
    adjectives = [t for t in tokens if t.tags & ADJECTIVE_TAGS]
    if len(adjectives) != 1:
        raise MalformedSentenceError(
            f"expected exactly one adjective, found {len(adjectives)}"
        )
    polarity = 1 if "adjective-pos" in adjectives[0].tags else 0
    flips = sum(1 for t in tokens if t.tags & FLIP_TAGS)
    return polarity ^ (flips % 2)


def validate_sentence(tokens: Sequence[Token]) -> None:
    """Raise unless the sequence is a well-formed sentence under the grammar."""
    for t in tokens:
        Token(t.surface, t.tags)  # re-runs token invariants
    oracle_label(tokens)


# ---------------------------------------------------------------------------
# sampling

def _sample_sentence(config: GrammarConfig, rng) -> tuple[Token, ...]:
    vocab = config.vocab
    probs = config.slot_probabilities
    pick = lambda role: token(vocab[role][rng.integers(len(vocab[role]))], role)

    tokens: list[Token] = []
    if rng.random() < probs["opening"]:
        tokens.append(pick("opening"))
    tokens.append(pick("subject"))
    tokens.append(pick("copula"))
    if rng.random() < probs["modal"]:
        modal_pool = [("modal-neutral", s) for s in vocab["modal-neutral"]] + [
            ("flipper-modal", s) for s in vocab["flipper-modal"]
        ]
        role, surface = modal_pool[rng.integers(len(modal_pool))]
        tokens.append(token(surface, role))
    if rng.random() < probs["negation"]:
        tokens.append(pick("negation"))
    if rng.random() < probs["degree"]:
        degree_pool = [
            (role, s)
            for role in ("intensifier", "neutral-degree", "flipper-degree")
            for s in vocab[role]
        ]
        role, surface = degree_pool[rng.integers(len(degree_pool))]
        tokens.append(token(surface, role))
    adj_role = "adjective-pos" if rng.random() < 0.5 else "adjective-neg"
    tokens.append(pick(adj_role))
    if rng.random() < probs["tail"]:
        tokens.append(pick("tail"))
    return tuple(tokens)


def sample_corpus(config: GrammarConfig) -> Dataset:
    """Draw config.n_examples labeled sentences, deterministic in config.seed."""
    validate_config(config)
    rng = derive_rng(config.seed, "grammar", config.domain)
    sentences = [_sample_sentence(config, rng) for _ in range(config.n_examples)]
    n_train = round(config.train_fraction * config.n_examples)
    order = rng.permutation(config.n_examples)
    splits = ["test"] * config.n_examples
    for i in order[:n_train]:
        splits[i] = "train"
    examples = [
        Example(
            id=f"{_domain_prefix(config.domain)}-{i:06d}",
            tokens=toks,
            label=oracle_label(toks),
            split=splits[i],
        )
        for i, toks in enumerate(sentences)
    ]
    return Dataset(examples)


def _domain_prefix(domain: str) -> str:
    return {"in-domain": "ex", "ood-vocab": "ov", "ood-style": "os"}[domain]


def make_ood_corpus(config: GrammarConfig) -> Dataset:
    """Sample a domain-shifted corpus; oracle semantics are unchanged."""
    if config.domain == "in-domain":
        raise ConfigError("make_ood_corpus requires an out-of-domain config")
    return sample_corpus(config)


# ---------------------------------------------------------------------------
# serialization (JSON lines, one example per line)

def example_to_record(ex: Example) -> dict:
    return {
        "id": ex.id,
        "text": ex.text,
        "tokens": [{"surface": t.surface, "tags": sorted(t.tags)} for t in ex.tokens],
        "label": ex.label,
        "split": ex.split,
    }


def record_to_example(rec: Mapping) -> Example:
    tokens = tuple(
        Token(t["surface"], frozenset(t["tags"])) for t in rec["tokens"]
    )
    return Example(id=rec["id"], tokens=tokens, label=rec["label"], split=rec["split"])


def to_jsonl(dataset: Dataset) -> str:
    lines = [
        json.dumps(example_to_record(ex), ensure_ascii=False, separators=(",", ":"))
        for ex in dataset.examples
    ]
    return "\n".join(lines) + "\n" if lines else ""


def from_jsonl(text: str) -> Dataset:
    examples = [record_to_example(json.loads(line)) for line in text.splitlines() if line]
    return Dataset(examples)
