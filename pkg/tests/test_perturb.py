import pytest

from cfaug.errors import ConfigError, EmptySliceError
from cfaug.grammar import default_grammar_config, default_vocab, oracle_label, sample_corpus, token
from cfaug.grammar import Example
from cfaug.perturb import (
    PERTURBATION_TYPES,
    Counterfactual,
    Inapplicable,
    measured_flip_rate,
    perturb,
    perturb_all,
    pool_from_jsonl,
    pool_to_jsonl,
    sidecar_to_jsonl,
)
from cfaug.rngs import derive_rng

VOCAB = default_vocab()


def example(*pairs, ex_id="e-0"):
    tokens = tuple(token(s, r) for s, r in pairs)
    return Example(id=ex_id, tokens=tokens, label=oracle_label(tokens), split="train")


BARE = example(("the movie", "subject"), ("is", "copula"), ("great", "adjective-pos"))


class TestSingleEdits:
    def test_negation_inserts_and_flips(self, rng):
        cf = perturb(BARE, "negation", rng, VOCAB)
        assert any("negation" in t.tags for t in cf.tokens)
        assert cf.oracle_label == 0

    def test_negation_removes_when_present(self, rng):
        ex = example(
            ("the movie", "subject"), ("is", "copula"), ("not", "negation"), ("great", "adjective-pos")
        )
        cf = perturb(ex, "negation", rng, VOCAB)
        assert not any("negation" in t.tags for t in cf.tokens)
        assert cf.oracle_label == 1 - ex.label

    def test_insert_flipper_modal_reads_like_paper(self):
        # a draw that picks the modal branch produces "supposed to be"-style flips
        rng = derive_rng(2, "demo")
        results = [perturb(BARE, "insert", rng, VOCAB) for _ in range(20)]
        by_text = {cf.text: cf for cf in results}
        assert "the movie is supposed to be great" in by_text
        assert by_text["the movie is supposed to be great"].oracle_label == 0

    def test_shuffle_moves_opening_and_keeps_label(self, rng):
        ex = example(
            ("honestly", "opening"),
            ("the movie", "subject"),
            ("is", "copula"),
            ("great", "adjective-pos"),
            ("overall", "tail"),
        )
        cf = perturb(ex, "shuffle", rng, VOCAB)
        assert cf.tokens[0].surface == "overall"
        assert cf.tokens[-1].surface == "honestly"
        assert cf.oracle_label == ex.label

    def test_shuffle_inapplicable_without_segments(self, rng):
        assert isinstance(perturb(BARE, "shuffle", rng, VOCAB), Inapplicable)

    def test_delete_inapplicable_without_optional_tokens(self, rng):
        assert isinstance(perturb(BARE, "delete", rng, VOCAB), Inapplicable)

    def test_restructure_preserves_token_multiset(self, rng):
        ex = example(
            ("honestly", "opening"),
            ("the movie", "subject"),
            ("is", "copula"),
            ("not", "negation"),
            ("very", "intensifier"),
            ("great", "adjective-pos"),
        )
        cf = perturb(ex, "restructure", rng, VOCAB)
        assert sorted(t.surface for t in cf.tokens) == sorted(t.surface for t in ex.tokens)
        assert cf.tokens != ex.tokens
        assert cf.oracle_label == ex.label

    def test_lexical_changes_adjective_only(self, rng):
        cf = perturb(BARE, "lexical", rng, VOCAB)
        assert cf.tokens[0] == BARE.tokens[0]
        assert cf.tokens[1] == BARE.tokens[1]
        assert cf.tokens[2].surface != "great"

    def test_resemantic_toggles_modal_category(self, rng):
        ex = example(
            ("the movie", "subject"),
            ("is", "copula"),
            ("supposed to be", "flipper-modal"),
            ("great", "adjective-pos"),
        )
        cf = perturb(ex, "resemantic", rng, VOCAB)
        assert not any("flipper-modal" in t.tags for t in cf.tokens)
        assert cf.oracle_label == 1 - ex.label

    def test_unknown_type_rejected(self, rng):
        with pytest.raises(ConfigError):
            perturb(BARE, "paraphrase", rng, VOCAB)

    def test_result_never_identical(self, rng):
        for ptype in PERTURBATION_TYPES:
            result = perturb(BARE, ptype, rng, VOCAB)
            if isinstance(result, Counterfactual):
                assert result.tokens != BARE.tokens


class TestPerturbAll:
    def test_counts_one_example_all_types(self):
        ex = example(
            ("honestly", "opening"),
            ("the movie", "subject"),
            ("is", "copula"),
            ("certain to be", "modal-neutral"),
            ("great", "adjective-pos"),
            ("overall", "tail"),
        )
        pool = perturb_all([ex], PERTURBATION_TYPES, per_example=1, seed=0, vocab=VOCAB)
        assert len(pool) == 8  # every type applies, and no two edits coincide

    def test_coinciding_edits_deduplicate(self):
        # deleting the only negation produces the same sentence as the
        # negation toggle; the pool keeps a single copy
        ex = example(
            ("the movie", "subject"),
            ("is", "copula"),
            ("not", "negation"),
            ("great", "adjective-pos"),
        )
        pool = perturb_all([ex], ("negation", "delete"), per_example=1, seed=0, vocab=VOCAB)
        assert len(pool) == 1
        assert pool.items[0].type == "negation"

    def test_no_duplicate_origin_token_pairs(self, small_corpus):
        pool = perturb_all(
            small_corpus.split("train")[:150], PERTURBATION_TYPES, per_example=3, seed=1, vocab=VOCAB
        )
        keys = [(cf.origin_id, cf.tokens) for cf in pool]
        assert len(keys) == len(set(keys))

    def test_deterministic_and_order_independent(self, small_corpus):
        examples = small_corpus.split("train")[:40]
        a = perturb_all(examples, PERTURBATION_TYPES, per_example=2, seed=9, vocab=VOCAB)
        b = perturb_all(list(reversed(examples)), PERTURBATION_TYPES, per_example=2, seed=9, vocab=VOCAB)
        assert {(cf.id, cf.tokens) for cf in a} == {(cf.id, cf.tokens) for cf in b}

    def test_empty_types_rejected(self, small_corpus):
        with pytest.raises(ConfigError):
            perturb_all(small_corpus.examples[:5], (), per_example=1, seed=0, vocab=VOCAB)

    def test_validates_every_result(self, small_corpus):
        pool = perturb_all(
            small_corpus.split("train")[:100], PERTURBATION_TYPES, per_example=1, seed=2, vocab=VOCAB
        )
        for cf in pool:
            assert cf.oracle_label == oracle_label(cf.tokens)


@pytest.fixture(scope="module")
def rate_pool():
    ds = sample_corpus(default_grammar_config(n_examples=1500, seed=21))
    pool = perturb_all(ds.examples, PERTURBATION_TYPES, per_example=1, seed=4, vocab=VOCAB)
    return ds, pool


class TestFlipRates:
    def test_negation_flips_exactly(self, rate_pool):
        ds, pool = rate_pool
        assert measured_flip_rate(pool, "negation", ds) == 1.0

    def test_reorderings_never_flip(self, rate_pool):
        ds, pool = rate_pool
        assert measured_flip_rate(pool, "restructure", ds) == 0.0
        assert measured_flip_rate(pool, "shuffle", ds) == 0.0

    def test_other_types_flip_strictly_between(self, rate_pool):
        ds, pool = rate_pool
        for ptype in ("quantifier", "lexical", "resemantic", "insert", "delete"):
            rate = measured_flip_rate(pool, ptype, ds)
            assert 0.0 < rate < 1.0, ptype

    def test_lexical_rate_matches_lexicon_composition(self, rate_pool):
        ds, pool = rate_pool
        # replacement draws uniformly from the 15 other adjectives, 8 of
        # which carry the opposite polarity
        assert abs(measured_flip_rate(pool, "lexical", ds) - 8 / 15) < 0.05

    def test_empty_slice_rejected(self, rate_pool):
        ds, pool = rate_pool
        negation_only = [cf for cf in pool if cf.type == "negation"]
        with pytest.raises(EmptySliceError):
            measured_flip_rate(negation_only, "shuffle", ds)


class TestSerialization:
    def test_pool_round_trip_with_sidecar(self, small_corpus):
        pool = perturb_all(
            small_corpus.split("train")[:30], PERTURBATION_TYPES, per_example=1, seed=3, vocab=VOCAB
        )
        text = pool_to_jsonl(pool.items)
        sidecar = sidecar_to_jsonl(pool.items)
        assert '"oracle_label"' not in text  # hidden labels live in the sidecar only
        back = pool_from_jsonl(text, sidecar)
        assert back == pool.items

    def test_labeled_pool_records_sources(self, small_corpus):
        pool = perturb_all(small_corpus.examples[:5], ("negation",), per_example=1, seed=3, vocab=VOCAB)
        labeled = [cf.with_label(0, "policy:invariant") for cf in pool]
        text = pool_to_jsonl(labeled)
        back = pool_from_jsonl(text)
        assert all(cf.label_source == "policy:invariant" for cf in back)
        assert all(cf.assigned_label == 0 for cf in back)
