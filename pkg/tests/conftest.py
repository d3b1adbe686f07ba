import numpy as np
import pytest
from pathlib import Path

from folkgen.model import new_model
from folkgen.pipeline import load_corpus, normalize_corpus
from folkgen.representation import build_vocabulary, encode_song

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def corpus_path():
    return FIXTURES / "fixture_corpus.abc"


@pytest.fixture(scope="session")
def fixture_scores(corpus_path):
    scores, skips = load_corpus(corpus_path)
    assert not skips
    return scores


@pytest.fixture(scope="session")
def fixture_songs(fixture_scores):
    songs, skips = normalize_corpus(fixture_scores)
    assert not skips
    return songs


@pytest.fixture(scope="session")
def fixture_vocab(fixture_songs):
    return build_vocabulary(fixture_songs)


@pytest.fixture(scope="session")
def fixture_encoded(fixture_songs, fixture_vocab):
    return [encode_song(s, fixture_vocab) for s in fixture_songs]


@pytest.fixture(scope="session")
def untrained_model(fixture_vocab):
    return new_model(fixture_vocab, hidden_size=8,
                     rng=np.random.default_rng(7))
