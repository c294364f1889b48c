"""Document-to-shard partitioning and redundant deployments.

A partition maps every document to one of n = 2**bits shards via
random-hyperplane (cosine) LSH over a feature-hashed embedding, so similar
documents tend to share a shard.  A deployment stacks r partitions:

* replication: one partition, r identical copies of every shard;
* repartition: r independently seeded partitions of the same corpus.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

import numpy as np

from .corpus import WeightedDocument
from .retrieval import InvertedIndex, build_index
from .seeds import derive_seed

__all__ = [
    "LshFunction",
    "Partition",
    "Deployment",
    "sample_lsh",
    "embed",
    "assign",
    "build_partition",
    "build_replication",
    "build_repartition",
    "iter_assignment_rows",
    "DEFAULT_EMBED_DIM",
]

DEFAULT_EMBED_DIM = 1024

REPLICATION = "replication"
REPARTITION = "repartition"


@dataclass(frozen=True)
class LshFunction:
    """bits random hyperplanes over the embedding space; n_shards = 2**bits."""

    bits: int
    hyperplanes: np.ndarray  # shape (bits, dim)
    seed: int

    @property
    def dim(self) -> int:
        return self.hyperplanes.shape[1]

    @property
    def n_shards(self) -> int:
        return 1 << self.bits


def sample_lsh(bits: int, dim: int = DEFAULT_EMBED_DIM, seed: int = 0) -> LshFunction:
    """Draw hyperplanes with i.i.d. standard normal coordinates."""
    if bits < 1:
        raise ValueError(f"bits must be >= 1, got {bits}")
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    rng = np.random.default_rng(seed)
    planes = rng.standard_normal((bits, dim))
    return LshFunction(bits=bits, hyperplanes=planes, seed=seed)


@lru_cache(maxsize=1 << 20)
def _term_bucket(term: str, dim: int) -> int:
    # Stable across processes, unlike built-in hash(); embeddings must not
    # depend on the interpreter's hash salt.
    digest = hashlib.blake2b(term.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def embed(doc: WeightedDocument, dim: int = DEFAULT_EMBED_DIM) -> np.ndarray:
    """Feature-hash the sparse term vector into a fixed-size dense one."""
    vec = np.zeros(dim)
    for term, weight in doc.weights.items():
        vec[_term_bucket(term, dim)] += weight
    return vec


def assign(lsh: LshFunction, doc: WeightedDocument) -> int:
    """Shard index of a document: one bit per hyperplane side."""
    projections = lsh.hyperplanes @ embed(doc, lsh.dim)
    shard = 0
    for i in range(lsh.bits):
        if projections[i] >= 0.0:
            shard |= 1 << i
    return shard


@dataclass(frozen=True)
class Partition:
    """One complete assignment of a corpus to n shards, with shard indexes.

    Empty shards are legal (they simply never hold an answer); every shard
    index is built against the corpus-wide statistics baked into the
    document weights.
    """

    n: int
    assignment: Mapping[str, int]
    shard_indexes: tuple[InvertedIndex, ...]
    lsh: LshFunction

    def shard_sizes(self) -> list[int]:
        sizes = [0] * self.n
        for shard in self.assignment.values():
            sizes[shard] += 1
        return sizes


@dataclass(frozen=True)
class Deployment:
    """r stacked partitions; the (replica, shard) grid the broker selects from."""

    kind: str
    partitions: tuple[Partition, ...]

    def __post_init__(self):
        if self.kind not in (REPLICATION, REPARTITION):
            raise ValueError(f"unknown deployment kind {self.kind!r}")
        if not self.partitions:
            raise ValueError("deployment needs at least one partition")
        if len({p.n for p in self.partitions}) != 1:
            raise ValueError("partitions disagree on shard count")

    @property
    def r(self) -> int:
        return len(self.partitions)

    @property
    def n(self) -> int:
        return self.partitions[0].n

    def shard_index(self, partition: int, shard: int) -> InvertedIndex:
        return self.partitions[partition].shard_indexes[shard]


def build_partition(docs: Sequence[WeightedDocument], lsh: LshFunction) -> Partition:
    """Assign every document and build the n per-shard inverted indexes."""
    n = lsh.n_shards
    assignment: dict[str, int] = {}
    members: list[list[WeightedDocument]] = [[] for _ in range(n)]
    for doc in docs:
        shard = assign(lsh, doc)
        assignment[doc.id] = shard
        members[shard].append(doc)
    shard_indexes = tuple(build_index(shard_docs) for shard_docs in members)
    return Partition(n=n, assignment=assignment, shard_indexes=shard_indexes, lsh=lsh)


def build_replication(partition: Partition, r: int) -> Deployment:
    """r identical copies of one partition (shared underlying indexes)."""
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    return Deployment(kind=REPLICATION, partitions=(partition,) * r)


def partition_seed(seed: int, partition_index: int) -> int:
    """Child LSH seed for one partition of a deployment."""
    return derive_seed(seed, "lsh", partition_index)


def build_repartition(
    docs: Sequence[WeightedDocument],
    r: int,
    bits: int,
    seed: int,
    dim: int = DEFAULT_EMBED_DIM,
) -> Deployment:
    """r independently seeded LSH partitions of the same corpus.

    Child seeds are mixed from (seed, partition index), so partition 0 of a
    repartition deployment equals the replication partition built from
    ``partition_seed(seed, 0)``.
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    seeds = [partition_seed(seed, i) for i in range(r)]
    if len(set(seeds)) != r:
        raise ValueError("derived partition seeds collide; change the master seed")
    partitions = tuple(
        build_partition(docs, sample_lsh(bits, dim, child_seed)) for child_seed in seeds
    )
    return Deployment(kind=REPARTITION, partitions=partitions)


def iter_assignment_rows(deployment: Deployment) -> Iterator[tuple[str, int, int]]:
    """(doc_id, partition_index, shard_index) rows in canonical order."""
    for i, partition in enumerate(deployment.partitions):
        for doc_id in sorted(partition.assignment):
            yield doc_id, i, partition.assignment[doc_id]
