"""End-to-end simulation of broker-side search under response misses.

A query run selects grid cells with one of the six schemes, drops each
selected cell independently with the miss probability, merges the
survivors' local top-k lists, and scores the merged list against the
centralized single-index ranking (recall at m).  Every random draw is
keyed off a master seed, query id, and cell coordinates, so results are
byte-identical regardless of evaluation order or worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from heapq import merge as heap_merge
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats as scipy_stats

from .corpus import (
    QueryVector,
    RawDocument,
    SyntheticCorpusSpec,
    build_corpus_stats,
    generate_synthetic_corpus,
    load_corpus,
    weight_document,
    weight_query,
)
from .partition import (
    REPARTITION,
    REPLICATION,
    Deployment,
    build_partition,
    build_repartition,
    build_replication,
    partition_seed,
    sample_lsh,
)
from .retrieval import ScoredResult, build_index, centralized_topm, search
from .seeds import derive_seed, unit_uniform
from .selection import (
    Selection,
    select_nored,
    select_psmartred,
    select_ptop,
    select_random,
    select_rfullred,
    select_rsmartred,
)
from .shard_index import (
    DEFAULT_GAMMA,
    SuccessDistribution,
    estimate_distribution,
    sample_shard_indexes,
    uniform_distribution,
)

__all__ = [
    "SCHEMES",
    "REPARTITION_ONLY_SCHEMES",
    "MissModel",
    "QueryOutcome",
    "TTestResult",
    "ConfigError",
    "ExperimentConfig",
    "MetricsRow",
    "MetricsTable",
    "make_selection",
    "run_query",
    "recall_at_m",
    "paired_ttest",
    "validate_config",
    "run_experiment",
]

SCHEMES = ("Random", "NoRed", "rFullRed", "rSmartRed", "pTop", "pSmartRed")
# Schemes that spread distinct shard sets across partitions only make
# sense when the partitions actually differ.
REPARTITION_ONLY_SCHEMES = frozenset({"pTop", "pSmartRed"})


@dataclass(frozen=True)
class MissModel:
    """Independent Bernoulli response misses, derived from a seed.

    A draw depends only on (seed, query id, partition, shard), never on
    evaluation order, so any schedule sees the same misses.
    """

    miss_prob: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ValueError(f"miss_prob must be in [0, 1], got {self.miss_prob}")

    def is_miss(self, query_id: str, partition: int, shard: int) -> bool:
        return (
            unit_uniform(self.seed, "miss", query_id, partition, shard)
            < self.miss_prob
        )


@dataclass(frozen=True)
class QueryOutcome:
    query_id: str
    responded: frozenset[tuple[int, int]]
    merged: tuple[str, ...]
    recall: float


def make_selection(
    scheme: str,
    t: int,
    dists: Sequence[SuccessDistribution],
    n: int,
    r: int,
    miss_prob: float,
    random_seed: int = 0,
) -> Selection:
    """Dispatch one scheme; budget is t * r cells."""
    budget = t * r
    if scheme == "Random":
        return select_random(n, r, budget, seed=random_seed)
    if scheme == "NoRed":
        return select_nored(dists[0], budget, r=r)
    if scheme == "rFullRed":
        return select_rfullred(dists[0], t, r)
    if scheme == "rSmartRed":
        return select_rsmartred(dists[0], miss_prob, r, budget)
    if scheme == "pTop":
        return select_ptop(dists, t)
    if scheme == "pSmartRed":
        return select_psmartred(dists, miss_prob, budget)
    raise ValueError(f"unknown scheme {scheme!r}")


def _result_rank_key(result: ScoredResult):
    return (-result.score, result.doc_id)


def merge_topm(result_lists, m: int) -> list[ScoredResult]:
    """Merge sorted per-shard result lists into a deduplicated top-m.

    Scores are identical wherever a document is indexed, so merging by
    (score desc, doc id asc) reproduces the centralized order restricted
    to the documents present in the inputs.
    """
    merged: list[ScoredResult] = []
    seen: set[str] = set()
    for result in heap_merge(*result_lists, key=_result_rank_key):
        if result.doc_id in seen:
            continue
        seen.add(result.doc_id)
        merged.append(result)
        if len(merged) == m:
            break
    return merged


def recall_at_m(merged_ids: Sequence[str], centralized_ids: Sequence[str]) -> float:
    """Fraction of the centralized top-m the merged list recovered.

    The denominator is the centralized list's actual length (it may hold
    fewer than m documents on small corpora); an empty centralized list
    means there was nothing to find, which counts as full recall.
    """
    if not centralized_ids:
        return 1.0
    hits = len(set(merged_ids) & set(centralized_ids))
    return hits / len(centralized_ids)


def _responding_cells(selection, miss_model, query_id):
    return frozenset(
        cell
        for cell in selection.chosen
        if not miss_model.is_miss(query_id, cell[0], cell[1])
    )


def _distinct_survivor_cells(kind, responded):
    # Replication copies are identical, so one responding copy of a shard
    # is as good as three; collapse to the distinct shard set.
    if kind == REPLICATION:
        return tuple(sorted({(0, shard) for _replica, shard in responded}))
    return tuple(sorted(responded))


def run_query(
    deployment: Deployment,
    scheme: str,
    query: QueryVector,
    miss_model: MissModel,
    *,
    t: int,
    centralized: Sequence[str],
    k_per_shard: int = 100,
    m: int = 100,
    dists: Sequence[SuccessDistribution] | None = None,
    selection_seed: int | None = None,
) -> QueryOutcome:
    """Run one query end to end and score it against the centralized list.

    ``dists`` holds one success distribution per partition (uniform when
    omitted); ``centralized`` is the precomputed centralized top-m id list.
    """
    n, r = deployment.n, deployment.r
    if scheme in REPARTITION_ONLY_SCHEMES and deployment.kind != REPARTITION:
        raise ValueError(f"scheme {scheme} requires a repartition deployment")
    if dists is None:
        dists = [uniform_distribution(n)] * r
    if selection_seed is None:
        selection_seed = derive_seed(miss_model.seed, "select", query.id)
    selection = make_selection(
        scheme, t, dists, n, r, miss_model.miss_prob, random_seed=selection_seed
    )
    responded = _responding_cells(selection, miss_model, query.id)
    cells = _distinct_survivor_cells(deployment.kind, responded)
    result_lists = [
        search(deployment.shard_index(i, j), query, k_per_shard) for i, j in cells
    ]
    merged = merge_topm(result_lists, m)
    merged_ids = tuple(result.doc_id for result in merged)
    return QueryOutcome(
        query_id=query.id,
        responded=responded,
        merged=merged_ids,
        recall=recall_at_m(merged_ids, centralized),
    )


class TTestResult(NamedTuple):
    statistic: float
    significant: bool


def paired_ttest(a, b, alpha: float = 0.05) -> TTestResult:
    """Two-sided paired t-test on matched samples.

    Zero variance resolves by convention: all-zero differences are not
    significant (statistic 0); identical nonzero differences are
    (statistic +/- inf).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValueError("paired samples must be 1-d and equally sized")
    if a.size < 2:
        raise ValueError("need at least two pairs")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    diff = a - b
    mean = float(diff.mean())
    sd = float(diff.std(ddof=1))
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, False)
        return TTestResult(math.copysign(math.inf, mean), True)
    statistic = mean / (sd / math.sqrt(diff.size))
    critical = float(scipy_stats.t.ppf(1.0 - alpha / 2.0, diff.size - 1))
    return TTestResult(statistic, abs(statistic) > critical)


class ConfigError(ValueError):
    """An experiment configuration is inconsistent; raised before any run."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of one experiment grid.

    Exactly one corpus source must be given.  Queries are sampled from the
    corpus itself unless ``query_path`` points at a query file.
    """

    corpus_path: str | None = None
    synthetic: SyntheticCorpusSpec | None = None
    query_path: str | None = None
    n_queries: int = 200
    lsh_bits: int = 4
    lsh_dim: int = 1024
    r: int = 3
    t_values: tuple[int, ...] = (4,)
    f_values: tuple[float, ...] = (0.0, 0.1)
    schemes: tuple[str, ...] = ("NoRed", "rFullRed", "rSmartRed")
    deployment_kinds: tuple[str, ...] = (REPLICATION,)
    m: int = 100
    k_per_shard: int = 100
    gamma: int = DEFAULT_GAMMA
    sample_prob: float = 0.4
    stopwords: tuple[str, ...] = ()
    seed: int = 0
    repeats: int = 1
    workers: int = 1


def validate_config(config: ExperimentConfig) -> list[str]:
    """All configuration problems, each naming the offending field."""
    problems: list[str] = []
    sources = (config.corpus_path is not None) + (config.synthetic is not None)
    if sources != 1:
        problems.append(
            "corpus_path/synthetic: exactly one corpus source is required"
        )
    if config.synthetic is not None:
        try:
            config.synthetic.validate()
        except ValueError as exc:
            problems.append(f"synthetic: {exc}")
    if config.lsh_bits < 1:
        problems.append(f"lsh_bits: must be >= 1, got {config.lsh_bits}")
    if config.lsh_dim < 1:
        problems.append(f"lsh_dim: must be >= 1, got {config.lsh_dim}")
    if config.r < 1:
        problems.append(f"r: must be >= 1, got {config.r}")
    n = 1 << max(config.lsh_bits, 1)
    if not config.t_values:
        problems.append("t_values: must not be empty")
    for t in config.t_values:
        if t < 1:
            problems.append(f"t_values: t must be >= 1, got {t}")
        elif t > n:
            problems.append(f"t_values: t={t} exceeds shard count n={n}")
    if not config.f_values:
        problems.append("f_values: must not be empty")
    for f in config.f_values:
        if not 0.0 <= f <= 1.0:
            problems.append(f"f_values: miss probability {f} outside [0, 1]")
    if not config.schemes:
        problems.append("schemes: must not be empty")
    for scheme in config.schemes:
        if scheme not in SCHEMES:
            problems.append(f"schemes: unknown scheme {scheme!r}")
    if not config.deployment_kinds:
        problems.append("deployment_kinds: must not be empty")
    for kind in config.deployment_kinds:
        if kind not in (REPLICATION, REPARTITION):
            problems.append(f"deployment_kinds: unknown kind {kind!r}")
    if len(set(config.deployment_kinds)) != len(config.deployment_kinds):
        problems.append("deployment_kinds: duplicate kind")
    needs_repartition = REPARTITION_ONLY_SCHEMES.intersection(config.schemes)
    if needs_repartition and REPARTITION not in config.deployment_kinds:
        problems.append(
            f"schemes: {sorted(needs_repartition)} require a repartition deployment"
        )
    if "NoRed" in config.schemes:
        for t in config.t_values:
            if t >= 1 and t * config.r > n:
                problems.append(
                    f"schemes: NoRed budget t*r={t * config.r} exceeds "
                    f"shard count n={n}"
                )
    if config.m < 1:
        problems.append(f"m: must be >= 1, got {config.m}")
    if config.k_per_shard < 1:
        problems.append(f"k_per_shard: must be >= 1, got {config.k_per_shard}")
    if config.gamma < 1:
        problems.append(f"gamma: must be >= 1, got {config.gamma}")
    if not 0.0 < config.sample_prob <= 1.0:
        problems.append(
            f"sample_prob: must be in (0, 1], got {config.sample_prob}"
        )
    if config.n_queries < 0:
        problems.append(f"n_queries: must be >= 0, got {config.n_queries}")
    if config.repeats < 1:
        problems.append(f"repeats: must be >= 1, got {config.repeats}")
    if config.workers < 1:
        problems.append(f"workers: must be >= 1, got {config.workers}")
    return problems


@dataclass(frozen=True)
class MetricsRow:
    scheme: str
    deployment: str
    f: float
    t: int
    r: int
    budget: int
    recall_mean: float
    recall_std: float
    n_queries: int
    seed: int


CSV_HEADER = "scheme,deployment,f,t,r,budget,recall_mean,recall_std,n_queries,seed"


@dataclass
class MetricsTable:
    """Aggregated grid results plus the per-(query, repeat) recall samples.

    ``samples`` maps (scheme, deployment, f, t) to an array of shape
    (n_queries, repeats); rows appear in configuration grid order.
    """

    rows: list[MetricsRow]
    samples: dict[tuple[str, str, float, int], np.ndarray]
    query_ids: tuple[str, ...]
    repeats: int

    def to_csv(self) -> str:
        lines = [CSV_HEADER]
        for row in self.rows:
            lines.append(
                f"{row.scheme},{row.deployment},{format(row.f, 'g')},{row.t},"
                f"{row.r},{row.budget},{row.recall_mean:.6f},"
                f"{row.recall_std:.6f},{row.n_queries},{row.seed}"
            )
        return "\n".join(lines) + "\n"

    def per_query_csv(self) -> str:
        lines = ["query_id,scheme,deployment,f,t,rep,recall"]
        keyed = []
        for (scheme, kind, f, t), recalls in self.samples.items():
            for qi, query_id in enumerate(self.query_ids):
                for rep in range(self.repeats):
                    keyed.append(
                        (query_id, scheme, kind, f, t, rep, recalls[qi, rep])
                    )
        keyed.sort()
        for query_id, scheme, kind, f, t, rep, recall in keyed:
            lines.append(
                f"{query_id},{scheme},{kind},{format(f, 'g')},{t},{rep},"
                f"{recall:.6f}"
            )
        return "\n".join(lines) + "\n"

    def mean_recall(self, scheme: str, kind: str, f: float, t: int) -> float:
        recalls = self.samples[(scheme, kind, f, t)]
        return float(recalls.mean())

    def per_query_means(self, scheme: str, kind: str, f: float, t: int) -> np.ndarray:
        """Per-query recall averaged over repeats, for paired tests."""
        return self.samples[(scheme, kind, f, t)].mean(axis=1)


class _DeploymentContext:
    """Per-deployment caches shared across the whole grid.

    Local shard results, per-query success distributions, and merged-list
    recalls depend only on the query and the surviving shard set, never on
    (scheme, f, repeat), so they are computed once and reused.
    """

    def __init__(self, kind, deployment, sampled, queries, centralized, config):
        self.kind = kind
        self.deployment = deployment
        self.queries = queries
        self.centralized = centralized
        self.config = config
        gamma = config.gamma
        if kind == REPLICATION:
            shared = [
                (estimate_distribution(sampled[0], q, gamma),) * deployment.r
                for q in queries
            ]
            self.dists = shared
        else:
            self.dists = [
                tuple(estimate_distribution(s, q, gamma) for s in sampled)
                for q in queries
            ]
        self._shard_results: dict[tuple[int, int, int], list[ScoredResult]] = {}
        self._recalls: dict[tuple[int, tuple], float] = {}

    def _local_results(self, qi, cell):
        key = (qi, cell[0], cell[1])
        cached = self._shard_results.get(key)
        if cached is None:
            index = self.deployment.shard_index(cell[0], cell[1])
            cached = search(index, self.queries[qi], self.config.k_per_shard)
            self._shard_results[key] = cached
        return cached

    def recall_for_survivors(self, qi, responded) -> float:
        cells = _distinct_survivor_cells(self.kind, responded)
        key = (qi, cells)
        cached = self._recalls.get(key)
        if cached is None:
            merged = merge_topm(
                [self._local_results(qi, cell) for cell in cells], self.config.m
            )
            cached = recall_at_m(
                [result.doc_id for result in merged], self.centralized[qi]
            )
            self._recalls[key] = cached
        return cached


def _prepare_corpus(config):
    stopwords = frozenset(config.stopwords)
    if config.corpus_path is not None:
        raw = load_corpus(config.corpus_path)
    else:
        raw = generate_synthetic_corpus(config.synthetic)
    stats = build_corpus_stats(raw, stopwords)
    weighted = [weight_document(doc, stats, stopwords) for doc in raw]
    return raw, stats, weighted


def _prepare_queries(config, raw, stats):
    stopwords = frozenset(config.stopwords)
    if config.query_path is not None:
        query_docs = load_corpus(config.query_path)
    else:
        rng = np.random.default_rng(derive_seed(config.seed, "queryset"))
        count = min(config.n_queries, len(raw))
        picks = sorted(rng.choice(len(raw), size=count, replace=False).tolist())
        query_docs = [
            RawDocument(id=f"q-{raw[i].id}", text=raw[i].text) for i in picks
        ]
    return [weight_query(doc.id, doc.text, stats, stopwords) for doc in query_docs]


def _build_deployment(kind, weighted, config):
    if kind == REPLICATION:
        lsh = sample_lsh(
            config.lsh_bits, config.lsh_dim, partition_seed(config.seed, 0)
        )
        return build_replication(build_partition(weighted, lsh), config.r)
    return build_repartition(
        weighted, config.r, config.lsh_bits, config.seed, config.lsh_dim
    )


def _scheme_allowed(scheme: str, kind: str) -> bool:
    return kind == REPARTITION or scheme not in REPARTITION_ONLY_SCHEMES


def run_experiment(config: ExperimentConfig) -> MetricsTable:
    """Run the full (deployment, scheme, f, t) grid deterministically.

    Repartition-only schemes are skipped on replication deployments; every
    other scheme runs under every configured kind.  The result is
    byte-identical for a fixed config regardless of ``workers``.
    """
    problems = validate_config(config)
    if problems:
        raise ConfigError("; ".join(problems))
    raw, stats, weighted = _prepare_corpus(config)
    queries = _prepare_queries(config, raw, stats)
    central_index = build_index(weighted)
    centralized = [centralized_topm(central_index, q, config.m) for q in queries]
    rows: list[MetricsRow] = []
    samples: dict[tuple[str, str, float, int], np.ndarray] = {}
    for kind in config.deployment_kinds:
        deployment = _build_deployment(kind, weighted, config)
        sampled = sample_shard_indexes(
            deployment, weighted, config.sample_prob, config.seed
        )
        ctx = _DeploymentContext(
            kind, deployment, sampled, queries, centralized, config
        )
        n, r = deployment.n, deployment.r
        for scheme in config.schemes:
            if not _scheme_allowed(scheme, kind):
                continue
            for f in config.f_values:
                miss_models = [
                    MissModel(f, derive_seed(config.seed, "miss", rep))
                    for rep in range(config.repeats)
                ]
                for t in config.t_values:
                    recalls = np.zeros((len(queries), config.repeats))

                    def run_one_query(qi):
                        query = queries[qi]
                        base_selection = None
                        if scheme != "Random":
                            base_selection = make_selection(
                                scheme, t, ctx.dists[qi], n, r, f
                            )
                        for rep, miss_model in enumerate(miss_models):
                            selection = base_selection
                            if selection is None:
                                selection = select_random(
                                    n,
                                    r,
                                    t * r,
                                    seed=derive_seed(
                                        miss_model.seed, "select", query.id
                                    ),
                                )
                            responded = _responding_cells(
                                selection, miss_model, query.id
                            )
                            recalls[qi, rep] = ctx.recall_for_survivors(
                                qi, responded
                            )

                    indices = range(len(queries))
                    if config.workers > 1 and len(queries) > 1:
                        with ThreadPoolExecutor(config.workers) as pool:
                            list(pool.map(run_one_query, indices))
                    else:
                        for qi in indices:
                            run_one_query(qi)
                    flat = recalls.reshape(-1)
                    mean = float(flat.mean()) if flat.size else 0.0
                    std = float(flat.std(ddof=1)) if flat.size > 1 else 0.0
                    if flat.size:
                        rows.append(
                            MetricsRow(
                                scheme=scheme,
                                deployment=kind,
                                f=f,
                                t=t,
                                r=config.r,
                                budget=t * config.r,
                                recall_mean=mean,
                                recall_std=std,
                                n_queries=len(queries),
                                seed=config.seed,
                            )
                        )
                    samples[(scheme, kind, f, t)] = recalls
    return MetricsTable(
        rows=rows,
        samples=samples,
        query_ids=tuple(q.id for q in queries),
        repeats=config.repeats,
    )
