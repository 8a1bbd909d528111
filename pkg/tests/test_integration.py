"""Cross-module behavior: live sessions inside the synthesis loop,
export round-trips, and harness-level measurements."""

import json

import numpy as np
import pytest

from cfaug.acquisition import sentence_scorer, synthesize_loop
from cfaug.annotate import SessionStore, drive_session, session_item_from_counterfactual
from cfaug.features import featurize
from cfaug.grammar import default_grammar_config, default_vocab, make_ood_corpus, sample_corpus
from cfaug.labeler import LabelingPolicy, apply_policy
from cfaug.neuralnet import ModelConfig, TrainConfig, error_rate_packed, init_model, pack, train, with_dropout
from cfaug.perturb import PERTURBATION_TYPES, perturb_all, pool_from_jsonl


class SessionBackedSink:
    """Annotation sink that routes every batch through a live session,
    answered by a scripted 'human'."""

    def __init__(self, corpus, store, answer):
        self.corpus = corpus
        self.store = store
        self.answer = answer
        self.rounds = []

    def annotate(self, items):
        session_items = [
            session_item_from_counterfactual(
                cf, self.corpus.by_id(cf.origin_id).text, self.corpus.by_id(cf.origin_id).label
            )
            for cf in items
        ]
        session = self.store.create_session(session_items, [cf.id for cf in items], budget=len(items))
        labels = drive_session(self.store, session.session_id, self.answer)
        self.rounds.append(dict(labels))
        return labels


class TestLiveSynthesisLoop:
    def test_mid_round_labels_reach_the_next_retraining(
        self, small_corpus, featurizer, base_model, tmp_path
    ):
        pool = list(
            perturb_all(
                small_corpus.split("train")[:40],
                PERTURBATION_TYPES,
                per_example=1,
                seed=9,
                vocab=default_vocab(),
            )
        )
        store = SessionStore(tmp_path)
        sink = SessionBackedSink(small_corpus, store, lambda payload: payload["origin_label"])
        seen_by_retrain = []

        def retrain(annotated_items):
            seen_by_retrain.append({cf.id: y for cf, y in annotated_items})
            return sentence_scorer(with_dropout(base_model, 0.5), featurizer), "h"

        result = synthesize_loop(
            pool,
            small_corpus,
            default_vocab(),
            PERTURBATION_TYPES,
            sentence_scorer(with_dropout(base_model, 0.5), featurizer),
            retrain,
            rounds=2,
            batch=6,
            sink=sink,
            T=5,
            seed=3,
        )
        assert len(sink.rounds) == 2
        # every label submitted in round 1 is visible to round 2's retraining
        assert set(sink.rounds[0]) <= set(seen_by_retrain[1])
        assert seen_by_retrain[1] == result.annotations
        # and the labels are exactly what the session recorded
        for item_id, label in sink.rounds[0].items():
            assert result.annotations[item_id] == label


class TestExportRoundTrip:
    def test_export_reconstructs_annotated_subset_via_training_only(
        self, small_corpus, tmp_path
    ):
        pool = list(
            perturb_all(
                small_corpus.split("train")[:10],
                ("negation", "lexical"),
                per_example=1,
                seed=4,
                vocab=default_vocab(),
            )
        )
        store = SessionStore(tmp_path)
        items = [
            session_item_from_counterfactual(
                cf, small_corpus.by_id(cf.origin_id).text, small_corpus.by_id(cf.origin_id).label
            )
            for cf in pool
        ]
        session = store.create_session(items, [cf.id for cf in pool], budget=7)
        labels = drive_session(store, session.session_id, lambda p: p["origin_label"])

        exported = store.export(session.session_id)
        annotations = {
            rec["id"]: rec["label"] for rec in map(json.loads, exported.splitlines())
        }
        assert annotations == labels

        reconstructed = apply_policy(
            LabelingPolicy(kind="training_only"), pool, annotations, small_corpus,
            annotated_source="human",
        )
        assert {cf.id: cf.assigned_label for cf in reconstructed} == annotations
        assert all(cf.label_source == "human" for cf in reconstructed)

        # the exported records also parse as a labeled pool
        parsed = pool_from_jsonl(exported)
        assert {cf.id for cf in parsed} == set(annotations)


class TestHarnessMeasurements:
    @pytest.mark.slow
    def test_ood_vocab_error_exceeds_in_domain(self):
        """Averaged over 20 seeds, a classifier trained in-domain does
        worse on the vocabulary-shifted corpus than on its own test split."""
        from cfaug.features import FeaturizerConfig

        fz = FeaturizerConfig(n_gram_orders=frozenset({1, 2}), dimension=2**12)
        in_domain, shifted = [], []
        for seed in range(20):
            corpus = sample_corpus(default_grammar_config(600, seed=100 + seed))
            ood = make_ood_corpus(
                default_grammar_config(300, seed=200 + seed, domain="ood-vocab", train_fraction=0.0)
            )
            trainset = corpus.split("train")
            model = train(
                init_model(ModelConfig(fz.dimension, hidden_dim=32, dropout_rate=0.0), seed),
                [(featurize(ex.tokens, fz), ex.label) for ex in trainset],
                TrainConfig(0.1, 16, 10, seed=seed),
            ).model
            test = corpus.split("test")
            in_domain.append(
                error_rate_packed(
                    model, pack([featurize(ex.tokens, fz) for ex in test]),
                    np.array([ex.label for ex in test]),
                )
            )
            shifted.append(
                error_rate_packed(
                    model, pack([featurize(ex.tokens, fz) for ex in ood]),
                    np.array([ex.label for ex in ood]),
                )
            )
        assert np.mean(shifted) > np.mean(in_domain)

    def test_trust_is_blind_on_flip_slices(self, small_corpus, featurizer, base_model):
        """The trust policy's accuracy on the negation slice trails its
        accuracy on reorder slices by the model's flip insensitivity."""
        pool = list(
            perturb_all(
                small_corpus.split("train")[:120],
                ("negation", "shuffle"),
                per_example=1,
                seed=11,
                vocab=default_vocab(),
            )
        )
        labeled = apply_policy(
            LabelingPolicy(kind="trust", base=base_model, featurizer=featurizer),
            pool,
            {},
            small_corpus,
        )
        by_type = {"negation": [], "shuffle": []}
        for cf in labeled:
            by_type[cf.type].append(cf.assigned_label == cf.oracle_label)
        assert np.mean(by_type["negation"]) < np.mean(by_type["shuffle"]) - 0.15
