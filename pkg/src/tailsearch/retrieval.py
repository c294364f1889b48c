"""Inverted indexes and exact top-k cosine retrieval.

Scoring is dot(query, doc) / norm(doc); the query norm is omitted since it
is constant across documents and cannot change a ranking.  The same code
path serves shard indexes, sampled broker indexes, and the centralized
oracle, so a document's score is bit-identical wherever it is indexed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import DuplicateDocumentError, QueryVector, WeightedDocument

__all__ = ["ScoredResult", "InvertedIndex", "build_index", "search", "centralized_topm"]


@dataclass(frozen=True)
class ScoredResult:
    doc_id: str
    score: float


class InvertedIndex:
    """Term -> postings mapping over TF-IDF weighted documents.

    Postings lists are sorted by document id; ``doc_norms`` stores each
    document's vector norm for score normalization at query time.
    """

    __slots__ = ("postings", "doc_norms", "n_docs")

    def __init__(self, postings, doc_norms):
        self.postings: dict[str, list[tuple[str, float]]] = postings
        self.doc_norms: dict[str, float] = doc_norms
        self.n_docs: int = len(doc_norms)

    def __len__(self) -> int:
        return self.n_docs

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.doc_norms


def build_index(docs: Iterable[WeightedDocument]) -> InvertedIndex:
    """Build an index over the given documents; empty input is allowed."""
    postings: dict[str, list[tuple[str, float]]] = {}
    doc_norms: dict[str, float] = {}
    for doc in docs:
        if doc.id in doc_norms:
            raise DuplicateDocumentError(f"duplicate document id {doc.id!r}")
        doc_norms[doc.id] = doc.norm
        for term, weight in doc.weights.items():
            postings.setdefault(term, []).append((doc.id, weight))
    for plist in postings.values():
        plist.sort()
    return InvertedIndex(postings, doc_norms)


def search(index: InvertedIndex, query: QueryVector, k: int) -> list[ScoredResult]:
    """Exact top-k by score, ties broken by ascending document id.

    Only documents sharing at least one term with the query are candidates;
    all term weights are positive, so every returned score is > 0.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    acc: dict[str, float] = {}
    get = acc.get
    for term, q_weight in query.weights.items():
        plist = index.postings.get(term)
        if plist is None:
            continue
        for doc_id, d_weight in plist:
            acc[doc_id] = get(doc_id, 0.0) + q_weight * d_weight
    norms = index.doc_norms
    ranked = sorted((-(total / norms[doc_id]), doc_id) for doc_id, total in acc.items())
    return [ScoredResult(doc_id, -neg_score) for neg_score, doc_id in ranked[:k]]


def centralized_topm(index: InvertedIndex, query: QueryVector, m: int) -> list[str]:
    """Ordered ids of the top-m documents in a single full index.

    This is the ground truth a distributed run's merged list is scored
    against; fewer than m ids come back when fewer documents match.
    """
    return [result.doc_id for result in search(index, query, m)]
