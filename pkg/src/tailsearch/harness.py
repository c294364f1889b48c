"""Prebuilt experiment suites mirroring the headline result shapes.

The suites are desk-scale: a 10k-document synthetic corpus, 16 shards,
3 replicas, 200 queries.  Each produces CSV files (the simulator schema
plus a ``figure`` column) and a two-column-per-series pivot CSV ready for
plotting.  Everything is keyed off one master seed.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .corpus import SyntheticCorpusSpec
from .partition import REPARTITION, REPLICATION
from .shard_index import SuccessDistribution
from .simulator import CSV_HEADER, ExperimentConfig, MetricsTable, run_experiment

__all__ = [
    "QueryStratum",
    "WHOLE",
    "SKEWED",
    "MOST_SKEWED",
    "DEFAULT_STRATA",
    "FigureSuiteConfig",
    "stratify_queries",
    "profile_distribution",
    "figure_csv",
    "pivot_csv",
    "run_figure_suite",
]


@dataclass(frozen=True)
class QueryStratum:
    """Queries whose top-shard probability exceeds a threshold.

    A threshold of 0 matches every query (the top shard of a distribution
    always carries positive mass), so strata with increasing thresholds
    form a chain of subsets.
    """

    name: str
    threshold: float


WHOLE = QueryStratum("Whole", 0.0)
SKEWED = QueryStratum("Skewed", 0.5)
MOST_SKEWED = QueryStratum("MostSkewed", 0.8)
DEFAULT_STRATA = (WHOLE, SKEWED, MOST_SKEWED)


def stratify_queries(
    query_ids: Sequence[str],
    dists: Sequence[SuccessDistribution],
    strata: Sequence[QueryStratum] = DEFAULT_STRATA,
) -> dict[str, list[str]]:
    """Assign each query to every stratum whose threshold it exceeds."""
    if len(query_ids) != len(dists):
        raise ValueError("one distribution per query id is required")
    result: dict[str, list[str]] = {stratum.name: [] for stratum in strata}
    for query_id, dist in zip(query_ids, dists):
        top = dist.top_prob()
        for stratum in strata:
            if top > stratum.threshold:
                result[stratum.name].append(query_id)
    return result


def profile_distribution(
    dists: Sequence[SuccessDistribution], top_k: int = 5
) -> np.ndarray:
    """Mean probability of each query's k most likely shards.

    Sorts every distribution descending and averages position-wise; the
    output is nonincreasing and shows how concentrated queries are.
    """
    if not dists:
        raise ValueError("need at least one distribution")
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    if top_k > dists[0].n:
        raise ValueError(f"top_k {top_k} exceeds shard count {dists[0].n}")
    stacked = np.stack([np.sort(d.p)[::-1][:top_k] for d in dists])
    return stacked.mean(axis=0)


@dataclass(frozen=True)
class FigureSuiteConfig:
    """Desk-scale defaults for the full figure suite."""

    corpus: SyntheticCorpusSpec = SyntheticCorpusSpec(
        n_docs=10_000, vocab_size=12_000, n_clusters=128, doc_len_mean=10.0, seed=7
    )
    lsh_bits: int = 4
    r: int = 3
    n_queries: int = 200
    m: int = 100
    k_per_shard: int = 100
    gamma: int = 500
    sample_prob: float = 0.4
    repeats: int = 20
    seed: int = 0
    workers: int = 1


def _base_experiment(config: FigureSuiteConfig) -> ExperimentConfig:
    return ExperimentConfig(
        synthetic=config.corpus,
        n_queries=config.n_queries,
        lsh_bits=config.lsh_bits,
        r=config.r,
        m=config.m,
        k_per_shard=config.k_per_shard,
        gamma=config.gamma,
        sample_prob=config.sample_prob,
        seed=config.seed,
        repeats=config.repeats,
        workers=config.workers,
    )


def figure_csv(figure: str, tables: Sequence[MetricsTable]) -> str:
    """Simulator CSV schema with a leading ``figure`` column."""
    lines = ["figure," + CSV_HEADER]
    for table in tables:
        for line in table.to_csv().splitlines()[1:]:
            lines.append(f"{figure},{line}")
    return "\n".join(lines) + "\n"


def pivot_csv(
    tables: Sequence[MetricsTable], x_field: str
) -> str:
    """Two-column-per-series plot data: x value, one column per scheme."""
    series: dict[tuple[str, str], dict] = {}
    xs: list = []
    for table in tables:
        for row in table.rows:
            key = (row.scheme, row.deployment)
            x = getattr(row, x_field)
            series.setdefault(key, {})[x] = row.recall_mean
            if x not in xs:
                xs.append(x)
    xs.sort()
    names = sorted(series)
    header = [x_field] + [f"{scheme}({kind})" for scheme, kind in names]
    lines = [",".join(header)]
    for x in xs:
        cells = [format(x, "g")]
        for key in names:
            value = series[key].get(x)
            cells.append("" if value is None else f"{value:.6f}")
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _write(out_dir: str, name: str, content: str) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)
    return path


def run_distribution_profile(config: FigureSuiteConfig, top_k: int = 5):
    """Per-rank mean shard probability of estimated vs. uniform guessing."""
    from .partition import build_partition, build_replication, sample_lsh
    from .partition import partition_seed
    from .shard_index import estimate_distribution, sample_shard_indexes
    from .simulator import _prepare_corpus, _prepare_queries, _build_deployment

    experiment = _base_experiment(config)
    raw, stats, weighted = _prepare_corpus(experiment)
    queries = _prepare_queries(experiment, raw, stats)
    deployment = _build_deployment(REPLICATION, weighted, experiment)
    sampled = sample_shard_indexes(
        deployment, weighted, experiment.sample_prob, experiment.seed
    )
    dists = [estimate_distribution(sampled[0], q, experiment.gamma) for q in queries]
    profile = profile_distribution(dists, top_k)
    n = deployment.n
    lines = ["rank,estimated_mean_p,uniform_p"]
    for rank, value in enumerate(profile, start=1):
        lines.append(f"{rank},{value:.6f},{1.0 / n:.6f}")
    strata = stratify_queries([q.id for q in queries], dists)
    strata_lines = ["stratum,threshold,count,fraction"]
    total = max(1, len(queries))
    for stratum in DEFAULT_STRATA:
        count = len(strata[stratum.name])
        strata_lines.append(
            f"{stratum.name},{format(stratum.threshold, 'g')},{count},"
            f"{count / total:.6f}"
        )
    return "\n".join(lines) + "\n", "\n".join(strata_lines) + "\n"


# Desk-scale grids for the f sweep and deployment comparison.  The budget
# sweep mirrors the published t axis {3, 5, 8, 10}, which needs 32 shards
# so NoRed's t*r <= n constraint holds at t = 10; it therefore runs at
# lsh_bits = 5 while the other suites keep the default 16 shards.
F_SWEEP_MISS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)
F_SWEEP_T = 5
BUDGET_SWEEP_T = (3, 5, 8, 10)
BUDGET_SWEEP_MISS = 0.1
BUDGET_SWEEP_BITS = 5
COMPARISON_MISS = (0.0, 0.05, 0.1, 0.2)
COMPARISON_T = 5


def run_f_sweep(config: FigureSuiteConfig) -> MetricsTable:
    """Recall vs. miss probability for the three replication schemes."""
    return run_experiment(
        replace(
            _base_experiment(config),
            schemes=("NoRed", "rFullRed", "rSmartRed"),
            deployment_kinds=(REPLICATION,),
            f_values=F_SWEEP_MISS,
            t_values=(F_SWEEP_T,),
        )
    )


def run_budget_sweep(config: FigureSuiteConfig) -> MetricsTable:
    """Recall vs. per-partition budget t at a fixed miss probability."""
    return run_experiment(
        replace(
            _base_experiment(config),
            lsh_bits=BUDGET_SWEEP_BITS,
            schemes=("NoRed", "rFullRed", "rSmartRed"),
            deployment_kinds=(REPLICATION,),
            f_values=(BUDGET_SWEEP_MISS,),
            t_values=BUDGET_SWEEP_T,
        )
    )


def run_deployment_comparison(config: FigureSuiteConfig) -> list[MetricsTable]:
    """Replication schemes vs. their repartition analogs on one corpus."""
    base = _base_experiment(config)
    replication = run_experiment(
        replace(
            base,
            schemes=("rFullRed", "rSmartRed"),
            deployment_kinds=(REPLICATION,),
            f_values=COMPARISON_MISS,
            t_values=(COMPARISON_T,),
        )
    )
    repartition = run_experiment(
        replace(
            base,
            schemes=("pTop", "pSmartRed"),
            deployment_kinds=(REPARTITION,),
            f_values=COMPARISON_MISS,
            t_values=(COMPARISON_T,),
        )
    )
    return [replication, repartition]


def run_figure_suite(config: FigureSuiteConfig, out_dir: str) -> list[str]:
    """Run every suite and write its CSVs; returns the written paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []
    profile, strata = run_distribution_profile(config)
    written.append(_write(out_dir, "distribution_profile.csv", profile))
    written.append(_write(out_dir, "query_strata.csv", strata))
    f_sweep = run_f_sweep(config)
    written.append(_write(out_dir, "f_sweep.csv", figure_csv("f_sweep", [f_sweep])))
    written.append(_write(out_dir, "f_sweep_plot.csv", pivot_csv([f_sweep], "f")))
    budget = run_budget_sweep(config)
    written.append(
        _write(out_dir, "budget_sweep.csv", figure_csv("budget_sweep", [budget]))
    )
    written.append(_write(out_dir, "budget_sweep_plot.csv", pivot_csv([budget], "t")))
    comparison = run_deployment_comparison(config)
    written.append(
        _write(
            out_dir,
            "deployment_comparison.csv",
            figure_csv("deployment_comparison", comparison),
        )
    )
    written.append(
        _write(out_dir, "deployment_comparison_plot.csv", pivot_csv(comparison, "f"))
    )
    return written
