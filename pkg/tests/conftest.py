"""Shared fixtures: small handcrafted corpora reused across test modules."""

import pytest

ACCEPTANCE_RESULTS: list[str] = []


@pytest.fixture(scope="session")
def record_criterion():
    """Collect one PASS/FAIL line per acceptance criterion.

    Lines are printed immediately (visible in failure output) and echoed
    in a terminal summary section so they always appear once per run.
    """

    def _record(name: str, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'} {name}: {detail}"
        ACCEPTANCE_RESULTS.append(line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)

from tailsearch.corpus import (
    RawDocument,
    SyntheticCorpusSpec,
    build_corpus_stats,
    generate_synthetic_corpus,
    weight_document,
    weight_query,
)
from tailsearch.retrieval import build_index


MINI_TEXTS = [
    ("d0", "apple banana cherry apple"),
    ("d1", "banana banana date"),
    ("d2", "cherry date elderberry"),
    ("d3", "apple elderberry elderberry fig"),
    ("d4", "fig grape apple banana"),
    ("d5", "grape grape grape cherry"),
    ("d6", "date fig grape"),
    ("d7", "elderberry apple date banana"),
]


@pytest.fixture(scope="session")
def mini_docs():
    return [RawDocument(id=doc_id, text=text) for doc_id, text in MINI_TEXTS]


@pytest.fixture(scope="session")
def mini_corpus(mini_docs):
    """(docs, stats, weighted, index) for the eight handcrafted documents."""
    stats = build_corpus_stats(mini_docs)
    weighted = [weight_document(doc, stats) for doc in mini_docs]
    return mini_docs, stats, weighted, build_index(weighted)


@pytest.fixture(scope="session")
def mini_query(mini_corpus):
    _, stats, _, _ = mini_corpus
    return weight_query("q0", "apple banana", stats)


@pytest.fixture(scope="session")
def synthetic_corpus():
    """A 400 document generated corpus with stats, weights, and an index."""
    spec = SyntheticCorpusSpec(
        n_docs=400, vocab_size=600, n_clusters=6, doc_len_mean=12.0, seed=11
    )
    docs = generate_synthetic_corpus(spec)
    stats = build_corpus_stats(docs)
    weighted = [weight_document(doc, stats) for doc in docs]
    return docs, stats, weighted, build_index(weighted)
