import numpy as np
import pytest

from cfaug.features import FeaturizerConfig, featurize
from cfaug.grammar import default_grammar_config, sample_corpus
from cfaug.neuralnet import ModelConfig, TrainConfig, init_model, train


@pytest.fixture(scope="session")
def small_corpus():
    return sample_corpus(default_grammar_config(n_examples=800, seed=11))


@pytest.fixture(scope="session")
def featurizer():
    return FeaturizerConfig(n_gram_orders=frozenset({1, 2}), dimension=2**12)


@pytest.fixture(scope="session")
def base_model(small_corpus, featurizer):
    """A quickly trained base classifier over the small corpus."""
    train_examples = small_corpus.split("train")
    data = [(featurize(ex.tokens, featurizer), ex.label) for ex in train_examples]
    model = init_model(ModelConfig(featurizer.dimension, hidden_dim=32, dropout_rate=0.0), seed=3)
    return train(model, data, TrainConfig(0.1, 16, 12, seed=4)).model


@pytest.fixture(scope="session")
def warm_model(small_corpus, featurizer):
    """Dropout-regularized twin of the base classifier (pairwise warm start)."""
    train_examples = small_corpus.split("train")
    data = [(featurize(ex.tokens, featurizer), ex.label) for ex in train_examples]
    model = init_model(ModelConfig(featurizer.dimension, hidden_dim=32, dropout_rate=0.5), seed=5)
    return train(model, data, TrainConfig(0.1, 16, 12, seed=6)).model


@pytest.fixture()
def rng():
    return np.random.default_rng(123)
