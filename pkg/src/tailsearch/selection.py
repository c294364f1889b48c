"""Shard-selection schemes for redundant deployments.

The broker must pick ``budget = t * r`` cells out of an r x n grid of
(replica, shard) pairs, knowing each shard's success probability and the
per-node miss probability.  Schemes range from ignoring redundancy
entirely (NoRed) to the miss-aware scheme that scores the i-th extra
replica of shard j as ``miss_prob**i * p[j]`` and provably maximizes the
chance that some selected, responding shard holds the answer.

Replica and shard indexes are 0-based throughout, so the first replica of
shard j is cell (0, j) and an extra replica at depth i multiplies the
shard's probability by ``miss_prob**i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .shard_index import SuccessDistribution

__all__ = [
    "SelectionError",
    "Selection",
    "SelectionBudget",
    "select_random",
    "select_nored",
    "select_rfullred",
    "select_rsmartred",
    "select_ptop",
    "select_psmartred",
]


class SelectionError(ValueError):
    """A selection request is inconsistent with the deployment grid."""


@dataclass(frozen=True)
class SelectionBudget:
    """Per-partition budget t and replica count r; total is t * r cells."""

    t: int
    r: int

    def __post_init__(self):
        if self.t < 1:
            raise SelectionError(f"t must be >= 1, got {self.t}")
        if self.r < 1:
            raise SelectionError(f"r must be >= 1, got {self.r}")

    @property
    def total(self) -> int:
        return self.t * self.r

    def validate_grid(self, n: int) -> None:
        if self.total > n * self.r:
            raise SelectionError(
                f"budget {self.total} exceeds grid size {n * self.r}"
            )


@dataclass(frozen=True)
class Selection:
    """A set of chosen (replica, shard) cells in an r x n grid.

    ``replica_counts`` collapses the cells to how many copies of each shard
    were chosen; the level sets ``{j: counts[j] >= i}`` always nest.  Under
    replication all copies of a shard are interchangeable, so a selection
    is *canonical* when each shard's chosen replicas form a prefix
    (0, j), (1, j), ...; ``canonical()`` rewrites any selection that way.
    """

    n: int
    r: int
    chosen: frozenset[tuple[int, int]]

    def __post_init__(self):
        for replica, shard in self.chosen:
            if not (0 <= replica < self.r and 0 <= shard < self.n):
                raise SelectionError(
                    f"cell ({replica}, {shard}) outside {self.r} x {self.n} grid"
                )

    @property
    def budget(self) -> int:
        return len(self.chosen)

    def sorted_cells(self) -> list[tuple[int, int]]:
        return sorted(self.chosen)

    def replica_counts(self) -> np.ndarray:
        counts = np.zeros(self.n, dtype=int)
        for _replica, shard in self.chosen:
            counts[shard] += 1
        return counts

    def levels(self) -> list[frozenset[int]]:
        """Level i (0-based) holds shards chosen on more than i replicas."""
        counts = self.replica_counts()
        return [
            frozenset(np.flatnonzero(counts >= i + 1).tolist()) for i in range(self.r)
        ]

    def level_sizes(self) -> tuple[int, ...]:
        counts = self.replica_counts()
        return tuple(int((counts >= i + 1).sum()) for i in range(self.r))

    def is_canonical(self) -> bool:
        return all(
            replica == 0 or (replica - 1, shard) in self.chosen
            for replica, shard in self.chosen
        )

    def canonical(self) -> "Selection":
        cells = frozenset(
            (depth, shard)
            for shard, count in enumerate(self.replica_counts())
            for depth in range(count)
        )
        return Selection(n=self.n, r=self.r, chosen=cells)

    @classmethod
    def from_replica_counts(
        cls, counts: Sequence[int], r: int
    ) -> "Selection":
        cells = []
        for shard, count in enumerate(counts):
            if not 0 <= count <= r:
                raise SelectionError(f"replica count {count} outside [0, {r}]")
            cells.extend((depth, shard) for depth in range(count))
        return cls(n=len(counts), r=r, chosen=frozenset(cells))


def _check_budget(budget: int, grid_size: int) -> None:
    if budget < 1:
        raise SelectionError(f"budget must be >= 1, got {budget}")
    if budget > grid_size:
        raise SelectionError(f"budget {budget} exceeds grid size {grid_size}")


def _top_shards(dist: SuccessDistribution, count: int) -> list[int]:
    """The count most probable shards, ties broken by ascending index."""
    p = dist.p
    order = sorted(range(dist.n), key=lambda j: (-p[j], j))
    return order[:count]


def select_random(n: int, r: int, budget: int, seed: int) -> Selection:
    """Uniform random choice of budget distinct cells, query-independent."""
    _check_budget(budget, n * r)
    rng = np.random.default_rng(seed)
    flat = rng.choice(n * r, size=budget, replace=False)
    cells = frozenset((int(c) // n, int(c) % n) for c in flat)
    return Selection(n=n, r=r, chosen=cells)


def select_nored(dist: SuccessDistribution, budget: int, r: int = 1) -> Selection:
    """budget distinct most-probable shards, all on replica 0.

    Ignores redundancy, so the budget cannot exceed the shard count.
    """
    _check_budget(budget, dist.n)
    cells = frozenset((0, j) for j in _top_shards(dist, budget))
    return Selection(n=dist.n, r=r, chosen=cells)


def select_rfullred(dist: SuccessDistribution, t: int, r: int) -> Selection:
    """All r replicas of the t most-probable shards."""
    if t > dist.n:
        raise SelectionError(f"t {t} exceeds shard count {dist.n}")
    _check_budget(t * r, dist.n * r)
    top = _top_shards(dist, t)
    cells = frozenset((i, j) for i in range(r) for j in top)
    return Selection(n=dist.n, r=r, chosen=cells)


def select_rsmartred(
    dist: SuccessDistribution, miss_prob: float, r: int, budget: int
) -> Selection:
    """Miss-aware selection: value the i-th extra replica of shard j at
    ``miss_prob**i * p[j]`` and keep the budget highest-valued cells.

    Ties break toward lower replica depth then lower shard index, which
    keeps the result canonical and makes the scheme degrade to NoRed at
    miss_prob = 0 (an extra replica of a never-missing shard is worthless).
    """
    if not 0.0 <= miss_prob <= 1.0:
        raise SelectionError(f"miss_prob must be in [0, 1], got {miss_prob}")
    _check_budget(budget, dist.n * r)
    p = dist.p
    cells = sorted(
        ((i, j) for i in range(r) for j in range(dist.n)),
        key=lambda cell: (-(miss_prob ** cell[0] * p[cell[1]]), cell[0], cell[1]),
    )
    return Selection(n=dist.n, r=r, chosen=frozenset(cells[:budget]))


def select_ptop(dists: Sequence[SuccessDistribution], t: int) -> Selection:
    """Top-t shards independently within each partition's own distribution."""
    r = len(dists)
    if r < 1:
        raise SelectionError("need at least one partition distribution")
    n = dists[0].n
    if any(d.n != n for d in dists):
        raise SelectionError("partition distributions disagree on shard count")
    if t > n:
        raise SelectionError(f"t {t} exceeds shard count {n}")
    _check_budget(t * r, n * r)
    cells = frozenset(
        (i, j) for i, dist in enumerate(dists) for j in _top_shards(dist, t)
    )
    return Selection(n=n, r=r, chosen=cells)


def select_psmartred(
    dists: Sequence[SuccessDistribution], miss_prob: float, budget: int
) -> Selection:
    """Repartition analog of the miss-aware scheme.

    Runs the replication scheme against partition 0's distribution to fix
    how many shards each replica level deserves, then spends level i's
    size on the top shards of partition i's own distribution.
    """
    r = len(dists)
    if r < 1:
        raise SelectionError("need at least one partition distribution")
    n = dists[0].n
    if any(d.n != n for d in dists):
        raise SelectionError("partition distributions disagree on shard count")
    base = select_rsmartred(dists[0], miss_prob, r, budget)
    cells = set()
    for i, size in enumerate(base.level_sizes()):
        cells.update((i, j) for j in _top_shards(dists[i], size))
    return Selection(n=n, r=r, chosen=frozenset(cells))
