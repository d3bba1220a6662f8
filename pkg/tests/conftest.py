import pytest

from longsum.corpus import ingest
from longsum.synthetic import write_toy_corpus
from longsum.vocab import Vocabulary


@pytest.fixture(scope="session")
def toy_corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "toy.jsonl"
    write_toy_corpus(path, 12, seed=7)
    return path


@pytest.fixture(scope="session")
def toy_corpus(toy_corpus_path):
    """(documents, split) for a small paraphrase-planted corpus."""
    return ingest(toy_corpus_path, seed=7)


@pytest.fixture(scope="session")
def toy_docs(toy_corpus):
    return toy_corpus[0]


@pytest.fixture(scope="session")
def toy_vocab(toy_docs):
    texts = [s for d in toy_docs for s in d.abstract_sents + d.body_sents]
    return Vocabulary.build(texts)
