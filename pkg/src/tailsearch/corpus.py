"""Corpus ingestion, tokenization, and TF-IDF weighting.

Every index in the system (shard indexes, the centralized oracle, the
sampled broker-side index) scores documents against the same corpus-wide
statistics, so term weighting lives here and is computed once per corpus.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "CorpusError",
    "DuplicateDocumentError",
    "MalformedRecordError",
    "UnindexableDocumentError",
    "RawDocument",
    "CorpusStats",
    "WeightedDocument",
    "QueryVector",
    "SyntheticCorpusSpec",
    "tokenize",
    "inverse_doc_frequency",
    "build_corpus_stats",
    "weight_document",
    "weight_query",
    "load_corpus",
    "generate_synthetic_corpus",
]

# Unicode-aware "alphanumeric runs": \w minus the underscore.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class CorpusError(ValueError):
    """Base class for corpus construction failures."""


class DuplicateDocumentError(CorpusError):
    """Two documents share an id."""


class MalformedRecordError(CorpusError):
    """A corpus file record is structurally invalid."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnindexableDocumentError(CorpusError):
    """A document has no tokens left after stopword removal."""


@dataclass(frozen=True)
class RawDocument:
    """An unprocessed document: a nonempty id and its text."""

    id: str
    text: str


@dataclass(frozen=True)
class CorpusStats:
    """Global statistics shared by every index built from one corpus."""

    n_docs: int
    doc_freq: Mapping[str, int]

    @property
    def vocabulary(self):
        return self.doc_freq.keys()


@dataclass(frozen=True)
class WeightedDocument:
    """A document as a sparse TF-IDF vector plus its Euclidean norm."""

    id: str
    weights: Mapping[str, float]
    norm: float


@dataclass(frozen=True)
class QueryVector:
    """A query weighted with the same global TF-IDF scheme as documents.

    Terms outside the corpus vocabulary keep a weight (document frequency
    taken as zero), so queries never silently lose terms.
    """

    id: str
    weights: Mapping[str, float]


def tokenize(text: str, stopwords: frozenset[str] = frozenset()) -> list[str]:
    """Lowercase and split on non-alphanumeric runs, preserving order.

    No stemming is applied; the stopword list defaults to empty.
    """
    tokens = _TOKEN_RE.findall(text.lower())
    if not stopwords:
        return tokens
    return [t for t in tokens if t not in stopwords]


def inverse_doc_frequency(n_docs: int, doc_freq: int) -> float:
    """IDF with add-one damping: ln(n_docs / (doc_freq + 1)) + 1.

    Strictly positive for any doc_freq <= n_docs, so term weights never
    vanish or flip sign.
    """
    return math.log(n_docs / (doc_freq + 1)) + 1.0


def build_corpus_stats(
    docs: Sequence[RawDocument], stopwords: frozenset[str] = frozenset()
) -> CorpusStats:
    """Count document frequencies over a corpus.

    Raises DuplicateDocumentError if two documents share an id and
    CorpusError for an empty corpus.
    """
    if not docs:
        raise CorpusError("corpus is empty")
    seen: set[str] = set()
    doc_freq: Counter[str] = Counter()
    for doc in docs:
        if doc.id in seen:
            raise DuplicateDocumentError(f"duplicate document id {doc.id!r}")
        seen.add(doc.id)
        doc_freq.update(set(tokenize(doc.text, stopwords)))
    return CorpusStats(n_docs=len(docs), doc_freq=dict(doc_freq))


def _weigh_terms(tokens, stats):
    counts = Counter(tokens)
    n_docs = stats.n_docs
    doc_freq = stats.doc_freq
    return {
        term: math.sqrt(count) * inverse_doc_frequency(n_docs, doc_freq.get(term, 0))
        for term, count in counts.items()
    }


def weight_document(
    doc: RawDocument, stats: CorpusStats, stopwords: frozenset[str] = frozenset()
) -> WeightedDocument:
    """TF-IDF weigh one document: sqrt(term count) times damped IDF.

    Raises UnindexableDocumentError when nothing survives tokenization.
    """
    tokens = tokenize(doc.text, stopwords)
    if not tokens:
        raise UnindexableDocumentError(
            f"document {doc.id!r} has no indexable tokens"
        )
    weights = _weigh_terms(tokens, stats)
    norm = math.sqrt(sum(w * w for w in weights.values()))
    return WeightedDocument(id=doc.id, weights=weights, norm=norm)


def weight_query(
    query_id: str,
    text: str,
    stats: CorpusStats,
    stopwords: frozenset[str] = frozenset(),
) -> QueryVector:
    """Weigh a query with the document formula; may be empty."""
    tokens = tokenize(text, stopwords)
    return QueryVector(id=query_id, weights=_weigh_terms(tokens, stats))


def load_corpus(path) -> list[RawDocument]:
    """Read line-delimited JSON records {"id": ..., "text": ...}.

    Any structural problem raises MalformedRecordError naming the offending
    line; a repeated id raises DuplicateDocumentError.
    """
    docs: list[RawDocument] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                raise MalformedRecordError(line_no, "blank line")
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(line_no, f"invalid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise MalformedRecordError(line_no, "record is not an object")
            doc_id = record.get("id")
            text = record.get("text")
            if not isinstance(doc_id, str) or not doc_id:
                raise MalformedRecordError(line_no, "missing or empty 'id'")
            if not isinstance(text, str):
                raise MalformedRecordError(line_no, "missing 'text'")
            if doc_id in seen:
                raise DuplicateDocumentError(
                    f"line {line_no}: duplicate document id {doc_id!r}"
                )
            seen.add(doc_id)
            docs.append(RawDocument(id=doc_id, text=text))
    return docs


@dataclass(frozen=True)
class SyntheticCorpusSpec:
    """Parameters for the topic-clustered synthetic corpus generator."""

    n_docs: int
    vocab_size: int
    n_clusters: int
    doc_len_mean: float
    seed: int = 0

    def validate(self) -> None:
        if self.n_docs < 1:
            raise CorpusError("n_docs must be >= 1")
        if self.vocab_size < 1:
            raise CorpusError("vocab_size must be >= 1")
        if self.n_clusters < 1:
            raise CorpusError("n_clusters must be >= 1")
        if self.doc_len_mean <= 0:
            raise CorpusError("doc_len_mean must be > 0")


# Token-draw mixture for synthetic documents: a small always-on cluster
# core gives documents of one cluster mutual cosine similarity, the Zipf
# tails give realistic document-frequency skew, and the common pool keeps
# per-query shard coverage from concentrating on a handful of shards.
_CORE_FRACTION = 0.15
_TAIL_FRACTION = 0.45
_COMMON_FRACTION = 0.40
_CORE_TERMS_PER_CLUSTER = 5


def _zipf_weights(size: int) -> np.ndarray:
    return 1.0 / np.arange(1, size + 1)


def _cluster_term_probs(spec: SyntheticCorpusSpec) -> np.ndarray:
    """Per-cluster term distribution over the whole vocabulary."""
    vocab = spec.vocab_size
    n_common = max(1, vocab // 5)
    per_cluster = (vocab - n_common) // spec.n_clusters
    probs = np.zeros((spec.n_clusters, vocab))
    common = np.zeros(vocab)
    common[:n_common] = _zipf_weights(n_common)
    common /= common.sum()
    for c in range(spec.n_clusters):
        if per_cluster >= 1:
            start = n_common + c * per_cluster
            pool = np.arange(start, start + per_cluster)
        else:
            pool = np.arange(vocab)  # tiny vocabulary: clusters share it
        n_core = min(_CORE_TERMS_PER_CLUSTER, len(pool))
        core = np.zeros(vocab)
        core[pool[:n_core]] = 1.0
        core /= core.sum()
        tail = np.zeros(vocab)
        if len(pool) > n_core:
            tail[pool[n_core:]] = _zipf_weights(len(pool) - n_core)
            tail /= tail.sum()
        else:
            tail = core
        probs[c] = (
            _CORE_FRACTION * core + _TAIL_FRACTION * tail + _COMMON_FRACTION * common
        )
        probs[c] /= probs[c].sum()
    return probs


def generate_synthetic_corpus(
    spec: SyntheticCorpusSpec, seed: int | None = None
) -> list[RawDocument]:
    """Generate a deterministic topic-clustered corpus.

    Documents draw tokens from their cluster's mixture of core terms,
    a Zipf-weighted cluster tail, and a Zipf-weighted common pool.  The
    explicit ``seed`` argument overrides ``spec.seed`` when given.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    terms = np.array([f"t{i:05d}" for i in range(spec.vocab_size)])
    cluster_probs = _cluster_term_probs(spec)
    clusters = rng.integers(spec.n_clusters, size=spec.n_docs)
    lengths = np.maximum(1, rng.poisson(spec.doc_len_mean, size=spec.n_docs))
    docs = []
    for i in range(spec.n_docs):
        token_ids = rng.choice(
            spec.vocab_size, size=lengths[i], p=cluster_probs[clusters[i]]
        )
        docs.append(RawDocument(id=f"d{i:06d}", text=" ".join(terms[token_ids])))
    return docs
