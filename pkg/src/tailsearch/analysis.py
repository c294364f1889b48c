"""Success-probability analysis for redundant shard selections.

The central quantity is the probability that at least one selected cell
both holds the query's best answer and responds, when every node misses
independently with probability ``miss_prob``.  For replication (identical
partitions) this has a closed form; this module provides that form, an
independent Monte-Carlo estimator, a brute-force optimal-selection search,
and a property suite that cross-checks all of them against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import selection as selection_mod
from .selection import Selection, SelectionError
from .shard_index import SuccessDistribution

__all__ = [
    "SpResult",
    "PropertyReport",
    "sp_closed_form",
    "sp_from_replica_counts",
    "sp_monte_carlo",
    "brute_force_best_selection",
    "compare_replication_repartition",
    "verify_properties",
    "BRUTE_FORCE_LIMIT",
]

BRUTE_FORCE_LIMIT = 10_000_000


@dataclass(frozen=True)
class SpResult:
    """A success-probability value and how it was obtained."""

    value: float
    method: str  # "closed_form" | "monte_carlo"
    trials: int | None = None
    std_error: float | None = None


def _clamp01(value: float) -> float:
    # Plain Python float on purpose: np.float64.__round__ scales before
    # rounding and can misround two-decimal displays of exact results.
    return float(min(1.0, max(0.0, value)))


def _check_miss_prob(miss_prob: float) -> None:
    if not 0.0 <= miss_prob <= 1.0:
        raise ValueError(f"miss_prob must be in [0, 1], got {miss_prob}")


def sp_closed_form(
    dist: SuccessDistribution, selection: Selection, miss_prob: float
) -> SpResult:
    """Exact replication success probability of a canonical selection.

    Sums over replica levels: the shards selected at depth i contribute
    their probability mass discounted by ``miss_prob**i`` (the first i
    copies all missed), and one overall factor (1 - miss_prob) pays for
    the copy that must respond.
    """
    _check_miss_prob(miss_prob)
    if dist.n != selection.n:
        raise SelectionError(
            f"distribution over {dist.n} shards, selection over {selection.n}"
        )
    if not selection.is_canonical():
        raise SelectionError(
            "selection is not in canonical replica-prefix form; "
            "call .canonical() first"
        )
    p = dist.p
    total = 0.0
    for depth, level in enumerate(selection.levels()):
        if not level:
            break  # levels nest, so all deeper ones are empty too
        total += miss_prob**depth * sum(p[j] for j in sorted(level))
    return SpResult(value=_clamp01((1.0 - miss_prob) * total), method="closed_form")


def sp_from_replica_counts(
    dist: SuccessDistribution, counts: Sequence[int], miss_prob: float
) -> float:
    """Equivalent per-shard form: sum of p[j] * (1 - miss_prob**counts[j]).

    Algebraically identical to the level form of ``sp_closed_form``; the
    property suite checks the two agree to 1e-12 on random selections.
    """
    _check_miss_prob(miss_prob)
    if len(counts) != dist.n:
        raise SelectionError(
            f"distribution over {dist.n} shards, counts over {len(counts)}"
        )
    p = dist.p
    value = sum(
        p[j] * (1.0 - miss_prob**count)
        for j, count in enumerate(counts)
        if count > 0
    )
    return _clamp01(value)


def _as_dists(dists, r: int) -> list[SuccessDistribution]:
    if isinstance(dists, SuccessDistribution):
        return [dists] * r
    dists = list(dists)
    if len(dists) != r:
        raise ValueError(f"need {r} partition distributions, got {len(dists)}")
    return dists


def sp_monte_carlo(
    dists,
    selection: Selection,
    miss_prob: float,
    kind: str = "replication",
    trials: int = 100_000,
    seed: int = 0,
) -> SpResult:
    """Estimate success probability by simulating answer location and misses.

    Each trial places the best answer on a shard drawn from the success
    distribution (independently per partition under repartition), draws a
    response for every selected cell, and succeeds if some selected,
    responding cell covers the answer.  The standard error is
    sqrt(v * (1 - v) / trials).
    """
    _check_miss_prob(miss_prob)
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    rng = np.random.default_rng(seed)
    parts = _as_dists(dists, selection.r)
    if any(d.n != selection.n for d in parts):
        raise SelectionError("distribution and selection shard counts differ")
    if kind == "replication":
        success = _mc_replication(parts[0], selection, miss_prob, trials, rng)
    elif kind == "repartition":
        success = _mc_repartition(parts, selection, miss_prob, trials, rng)
    else:
        raise ValueError(f"unknown deployment kind {kind!r}")
    value = float(success.mean())
    std_error = math.sqrt(value * (1.0 - value) / trials)
    return SpResult(
        value=value, method="monte_carlo", trials=trials, std_error=std_error
    )


def _mc_replication(dist, selection, miss_prob, trials, rng):
    # Copies of one shard are interchangeable, so only the per-shard count
    # of selected replicas matters: the answer survives if any of the
    # first counts[j] response draws for its shard succeeds.
    counts = selection.replica_counts()
    answer_shard = rng.choice(selection.n, size=trials, p=dist.p)
    responded = rng.random((trials, selection.r)) >= miss_prob
    any_up_to = np.cumsum(responded, axis=1) > 0
    count_for_trial = counts[answer_shard]
    clipped = np.clip(count_for_trial, 1, selection.r) - 1
    reachable = any_up_to[np.arange(trials), clipped]
    return (count_for_trial > 0) & reachable


def _mc_repartition(parts, selection, miss_prob, trials, rng):
    # Partitions are independent: the answer's shard is drawn per
    # partition, and each selected cell responds independently.
    masks = np.zeros((selection.r, selection.n), dtype=bool)
    for replica, shard in selection.sorted_cells():
        masks[replica, shard] = True
    success = np.zeros(trials, dtype=bool)
    for i, dist in enumerate(parts):
        answer_shard = rng.choice(selection.n, size=trials, p=dist.p)
        responded = rng.random(trials) >= miss_prob
        success |= masks[i][answer_shard] & responded
    return success


def _iter_replica_counts(n: int, r: int, budget: int) -> Iterator[tuple[int, ...]]:
    """All vectors of per-shard replica counts in [0, r] summing to budget."""

    def rec(prefix: list[int], shard: int, remaining: int):
        if shard == n:
            if remaining == 0:
                yield tuple(prefix)
            return
        if remaining > (n - shard) * r:
            return
        for count in range(min(r, remaining) + 1):
            prefix.append(count)
            yield from rec(prefix, shard + 1, remaining - count)
            prefix.pop()

    yield from rec([], 0, budget)


def brute_force_best_selection(
    dist: SuccessDistribution, miss_prob: float, r: int, budget: int
) -> tuple[Selection, SpResult]:
    """Exhaustive search for the replication selection maximizing success.

    Enumerates replica-count vectors (copies of one shard are
    interchangeable) and refuses instances whose raw cell-subset count
    exceeds BRUTE_FORCE_LIMIT.
    """
    _check_miss_prob(miss_prob)
    n = dist.n
    if not 1 <= budget <= n * r:
        raise SelectionError(f"budget {budget} outside [1, {n * r}]")
    if math.comb(n * r, budget) > BRUTE_FORCE_LIMIT:
        raise ValueError(
            f"instance too large for brute force: C({n * r}, {budget}) "
            f"> {BRUTE_FORCE_LIMIT}"
        )
    p = dist.p
    best_value = -1.0
    best_counts: tuple[int, ...] | None = None
    for counts in _iter_replica_counts(n, r, budget):
        value = sum(
            p[j] * (1.0 - miss_prob**c) for j, c in enumerate(counts) if c > 0
        )
        if value > best_value:
            best_value = value
            best_counts = counts
    assert best_counts is not None
    best = Selection.from_replica_counts(best_counts, r)
    return best, SpResult(value=_clamp01(best_value), method="closed_form")


def compare_replication_repartition(
    dist: SuccessDistribution,
    miss_prob: float,
    r: int,
    budget: int,
    trials: int = 100_000,
    seed: int = 0,
) -> tuple[SpResult, SpResult]:
    """Best replication scheme (closed form) vs. its repartition analog (MC).

    Both sides see the same per-partition distribution, isolating the
    deployment effect: repartition draws the answer's shard independently
    per partition, which can only help.
    """
    replication_sel = selection_mod.select_rsmartred(dist, miss_prob, r, budget)
    replication = sp_closed_form(dist, replication_sel, miss_prob)
    repartition_sel = selection_mod.select_psmartred([dist] * r, miss_prob, budget)
    repartition = sp_monte_carlo(
        [dist] * r,
        repartition_sel,
        miss_prob,
        kind="repartition",
        trials=trials,
        seed=seed,
    )
    return replication, repartition


@dataclass(frozen=True)
class PropertyReport:
    """Outcome of one verification property."""

    name: str
    passed: bool
    worst_margin: float
    limit: float
    detail: str


_LEVELS = {
    "quick": dict(
        identity=300,
        optimality=120,
        mc_instances=12,
        mc_trials=20_000,
        t2_budgets=(6, 9),
        t2_miss=(0.05, 0.2),
        t2_trials=20_000,
        monotonicity=80,
    ),
    "full": dict(
        identity=1000,
        optimality=500,
        mc_instances=50,
        mc_trials=100_000,
        t2_budgets=(6, 9, 15),
        t2_miss=(0.05, 0.1, 0.2),
        t2_trials=100_000,
        monotonicity=300,
    ),
}


def _random_instance(rng, max_n=6, max_r=3):
    n = int(rng.integers(2, max_n + 1))
    r = int(rng.integers(1, max_r + 1))
    budget = int(rng.integers(1, n * r + 1))
    alpha = float(rng.choice([0.3, 1.0, 3.0]))
    dist = SuccessDistribution(rng.dirichlet(np.full(n, alpha)))
    return n, r, budget, dist


def _random_canonical_selection(rng, n, r, budget):
    cells = rng.choice(n * r, size=budget, replace=False)
    raw = Selection(
        n=n, r=r, chosen=frozenset((int(c) // n, int(c) % n) for c in cells)
    )
    return raw.canonical()


def _check_algebraic_identity(rng, count) -> PropertyReport:
    limit = 1e-12
    worst = 0.0
    detail = f"{count} random selections"
    for _ in range(count):
        n, r, budget, dist = _random_instance(rng, max_n=8, max_r=4)
        sel = _random_canonical_selection(rng, n, r, budget)
        miss = float(rng.choice([0.0, 1.0, rng.uniform()]))
        by_levels = sp_closed_form(dist, sel, miss).value
        by_counts = sp_from_replica_counts(dist, sel.replica_counts(), miss)
        gap = abs(by_levels - by_counts)
        if gap > worst:
            worst = gap
            if gap > limit:
                detail = (
                    f"counterexample: n={n} r={r} budget={budget} miss={miss:.4f} "
                    f"levels={by_levels!r} counts={by_counts!r}"
                )
    return PropertyReport(
        "level-form matches per-shard form", worst <= limit, worst, limit, detail
    )


def _check_optimality(rng, instances) -> PropertyReport:
    limit = 1e-12
    worst = 0.0
    detail = f"{instances} random instances"
    miss_grid = np.arange(0.0, 1.0, 0.05)
    for _ in range(instances):
        n, r, budget, dist = _random_instance(rng)
        miss = float(rng.choice(miss_grid))
        scheme_sel = selection_mod.select_rsmartred(dist, miss, r, budget)
        scheme_value = sp_closed_form(dist, scheme_sel.canonical(), miss).value
        _best_sel, best = brute_force_best_selection(dist, miss, r, budget)
        gap = best.value - scheme_value
        if gap > worst:
            worst = gap
            if gap > limit:
                detail = (
                    f"counterexample: n={n} r={r} budget={budget} miss={miss:.2f} "
                    f"p={np.round(dist.p, 4).tolist()} "
                    f"scheme counts={scheme_sel.replica_counts().tolist()} "
                    f"value={scheme_value!r} < best {best.value!r} "
                    f"(counts={_best_sel.replica_counts().tolist()})"
                )
    return PropertyReport(
        "miss-aware selection matches brute-force optimum",
        worst <= limit,
        worst,
        limit,
        detail,
    )


def _check_closed_vs_mc(rng, instances, trials) -> PropertyReport:
    limit = 4.0
    worst = 0.0
    detail = f"{instances} instances x {trials} trials"
    for idx in range(instances):
        n, r, budget, dist = _random_instance(rng, max_n=8)
        miss = float(rng.uniform(0.02, 0.95))
        if idx % 2 == 0:
            sel = selection_mod.select_rsmartred(dist, miss, r, budget)
        else:
            sel = _random_canonical_selection(rng, n, r, budget)
        closed = sp_closed_form(dist, sel, miss)
        mc = sp_monte_carlo(
            dist, sel, miss, kind="replication", trials=trials,
            seed=int(rng.integers(2**63)),
        )
        se = max(mc.std_error, 1e-12)
        margin = abs(mc.value - closed.value) / se
        if margin > worst:
            worst = margin
            if margin > limit:
                detail = (
                    f"counterexample: n={n} r={r} budget={budget} miss={miss:.4f} "
                    f"closed={closed.value!r} mc={mc.value!r} se={mc.std_error!r}"
                )
    return PropertyReport(
        "closed form agrees with Monte Carlo", worst <= limit, worst, limit, detail
    )


def _check_repartition_advantage(rng, budgets, miss_probs, trials) -> PropertyReport:
    limit = 3.0
    worst = -math.inf
    detail = ""
    n, r = 8, 3
    shapes = {
        "skewed": SuccessDistribution(
            np.array([0.5**j for j in range(1, n + 1)])
            / sum(0.5**j for j in range(1, n + 1))
        ),
        "uniform": SuccessDistribution(np.full(n, 1.0 / n)),
    }
    cells = 0
    for shape_name, dist in shapes.items():
        for miss in miss_probs:
            for budget in budgets:
                cells += 1
                replication, repartition = compare_replication_repartition(
                    dist, miss, r, budget, trials=trials,
                    seed=int(rng.integers(2**63)),
                )
                se = max(repartition.std_error, 1e-12)
                margin = (replication.value - repartition.value) / se
                if margin > worst:
                    worst = margin
                    detail = (
                        f"tightest cell: {shape_name} miss={miss} budget={budget} "
                        f"replication={replication.value:.6f} "
                        f"repartition={repartition.value:.6f}"
                    )
    detail = f"{cells} grid cells x {trials} trials; {detail}"
    return PropertyReport(
        "repartition never loses to replication", worst <= limit, worst, limit, detail
    )


def _check_miss_monotonicity(rng, instances) -> PropertyReport:
    limit = 1e-12
    worst = 0.0
    detail = f"{instances} random instances"
    miss_grid = np.linspace(0.0, 1.0, 11)
    for _ in range(instances):
        n, r, budget, dist = _random_instance(rng)
        sel = _random_canonical_selection(rng, n, r, budget)
        values = [sp_closed_form(dist, sel, m).value for m in miss_grid]
        rise = max(
            (later - earlier)
            for earlier, later in zip(values, values[1:])
        )
        if rise > worst:
            worst = rise
            if rise > limit:
                detail = f"counterexample: n={n} r={r} budget={budget} values={values}"
        counts = sel.replica_counts()
        grow = np.flatnonzero(counts < r)
        if grow.size:
            shard = int(rng.choice(grow))
            grown = counts.copy()
            grown[shard] += 1
            miss = float(rng.uniform())
            drop = sp_from_replica_counts(dist, counts, miss) - sp_from_replica_counts(
                dist, grown, miss
            )
            if drop > worst:
                worst = drop
                if drop > limit:
                    detail = (
                        f"counterexample: adding a replica of shard {shard} lowered "
                        f"the value (n={n} r={r} miss={miss:.4f})"
                    )
    return PropertyReport(
        "success probability monotone in miss rate and selection growth",
        worst <= limit,
        worst,
        limit,
        detail,
    )


def verify_properties(level: str = "quick", seed: int = 0) -> list[PropertyReport]:
    """Run the cross-check suite; returns one report per property."""
    if level not in _LEVELS:
        raise ValueError(f"level must be one of {sorted(_LEVELS)}, got {level!r}")
    params = _LEVELS[level]
    rng = np.random.default_rng(seed)
    return [
        _check_algebraic_identity(rng, params["identity"]),
        _check_optimality(rng, params["optimality"]),
        _check_closed_vs_mc(rng, params["mc_instances"], params["mc_trials"]),
        _check_repartition_advantage(
            rng, params["t2_budgets"], params["t2_miss"], params["t2_trials"]
        ),
        _check_miss_monotonicity(rng, params["monotonicity"]),
    ]
