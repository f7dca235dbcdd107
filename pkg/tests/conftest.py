import pathlib

import pytest

from phraseindex import build_index, load_squad
from phraseindex.encode.wordvectors import toy_word_vector_table

DATA = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> pathlib.Path:
    return DATA


@pytest.fixture(scope="session")
def mini_corpus():
    return load_squad(str(DATA / "mini_squad.json"))


@pytest.fixture(scope="session")
def toy_vectors(mini_corpus):
    return toy_word_vector_table(mini_corpus, dim=8, seed=7)


@pytest.fixture(scope="session")
def sparse_index(mini_corpus):
    return build_index(mini_corpus, encoder="tfidf")


@pytest.fixture(scope="session")
def dense_index(mini_corpus, toy_vectors):
    return build_index(mini_corpus, encoder="lstm_sa", word_vectors=toy_vectors)


@pytest.fixture(scope="session")
def dense_lstm_index(mini_corpus, toy_vectors):
    return build_index(mini_corpus, encoder="lstm", word_vectors=toy_vectors)
