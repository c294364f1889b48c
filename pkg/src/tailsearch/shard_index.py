"""Broker-side sampled indexes and per-shard success distributions.

The broker cannot ask every shard where a query's best answer lives, so it
keeps a small index over a Bernoulli sample of each partition's documents.
At query time it searches that sample and converts the result ranks into a
probability distribution over shards: each sampled hit at rank j (1-based)
contributes ``gamma - j`` to the shard it came from, and the per-shard
sums are normalized.  A query with no sampled hits falls back to the
uniform distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import QueryVector, WeightedDocument
from .partition import REPLICATION, Deployment
from .retrieval import InvertedIndex, build_index, search
from .seeds import derive_seed

__all__ = [
    "SuccessDistribution",
    "SampledShardIndex",
    "uniform_distribution",
    "sample_shard_indexes",
    "estimate_distribution",
    "DEFAULT_GAMMA",
]

DEFAULT_GAMMA = 500


@dataclass(frozen=True)
class SuccessDistribution:
    """Probability, per shard, that the shard holds a query's best answer."""

    p: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.p, dtype=float)
        object.__setattr__(self, "p", arr)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("distribution must be a nonempty vector")
        if np.any(arr < 0.0):
            raise ValueError("shard probabilities must be nonnegative")
        if abs(float(arr.sum()) - 1.0) > 1e-9:
            raise ValueError(f"shard probabilities sum to {arr.sum()!r}, not 1")

    @property
    def n(self) -> int:
        return self.p.size

    def top_prob(self) -> float:
        return float(self.p.max())


def uniform_distribution(n: int) -> SuccessDistribution:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return SuccessDistribution(np.full(n, 1.0 / n))


@dataclass(frozen=True)
class SampledShardIndex:
    """A search index over a document sample, with each doc's home shard."""

    index: InvertedIndex
    origins: Mapping[str, int]  # sampled doc id -> shard index
    n_shards: int
    sample_prob: float


def sample_shard_indexes(
    deployment: Deployment,
    docs: Sequence[WeightedDocument],
    sample_prob: float,
    seed: int,
) -> tuple[SampledShardIndex, ...]:
    """One sampled index per partition, Bernoulli(sample_prob) per document.

    Under replication the partitions are identical, so a single sampled
    index is built and shared across all r slots of the returned tuple.
    """
    if not 0.0 < sample_prob <= 1.0:
        raise ValueError(f"sample_prob must be in (0, 1], got {sample_prob}")
    if deployment.kind == REPLICATION:
        shared = _sample_one(deployment.partitions[0], docs, sample_prob, seed, 0)
        return (shared,) * deployment.r
    return tuple(
        _sample_one(partition, docs, sample_prob, seed, i)
        for i, partition in enumerate(deployment.partitions)
    )


def _sample_one(partition, docs, sample_prob, seed, partition_index):
    rng = np.random.default_rng(derive_seed(seed, "sample", partition_index))
    keep = rng.random(len(docs)) < sample_prob
    sampled = [doc for doc, kept in zip(docs, keep) if kept]
    origins = {doc.id: partition.assignment[doc.id] for doc in sampled}
    return SampledShardIndex(
        index=build_index(sampled),
        origins=origins,
        n_shards=partition.n,
        sample_prob=sample_prob,
    )


def estimate_distribution(
    sampled: SampledShardIndex, query: QueryVector, gamma: int = DEFAULT_GAMMA
) -> SuccessDistribution:
    """Rank-weighted shard distribution from the sampled index's top gamma.

    The hit at 1-based rank j is worth ``gamma - j`` to its home shard, so
    the gamma-th hit is worth exactly zero.  No smoothing is applied: a
    shard without sampled hits gets probability 0.
    """
    if gamma < 1:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    scores = np.zeros(sampled.n_shards)
    for rank, result in enumerate(search(sampled.index, query, gamma), start=1):
        scores[sampled.origins[result.doc_id]] += gamma - rank
    total = scores.sum()
    if total <= 0.0:
        return uniform_distribution(sampled.n_shards)
    return SuccessDistribution(scores / total)
