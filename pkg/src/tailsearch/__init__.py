"""Tail-tolerant distributed search: deterministic simulator and analysis.

Builds sharded, redundant TF-IDF indexes (replication or LSH repartition),
runs broker-side approximate search under independent response misses, and
provides exact and Monte-Carlo machinery for the success probability of a
shard selection.
"""

from .analysis import (
    SpResult,
    brute_force_best_selection,
    compare_replication_repartition,
    sp_closed_form,
    sp_from_replica_counts,
    sp_monte_carlo,
    verify_properties,
)
from .corpus import (
    CorpusStats,
    QueryVector,
    RawDocument,
    SyntheticCorpusSpec,
    WeightedDocument,
    build_corpus_stats,
    generate_synthetic_corpus,
    load_corpus,
    tokenize,
    weight_document,
    weight_query,
)
from .harness import (
    FigureSuiteConfig,
    profile_distribution,
    run_figure_suite,
    stratify_queries,
)
from .partition import (
    Deployment,
    LshFunction,
    Partition,
    build_partition,
    build_replication,
    build_repartition,
    sample_lsh,
)
from .retrieval import InvertedIndex, ScoredResult, build_index, centralized_topm, search
from .selection import (
    Selection,
    SelectionBudget,
    SelectionError,
    select_nored,
    select_psmartred,
    select_ptop,
    select_random,
    select_rfullred,
    select_rsmartred,
)
from .shard_index import (
    SampledShardIndex,
    SuccessDistribution,
    estimate_distribution,
    sample_shard_indexes,
    uniform_distribution,
)
from .simulator import (
    ConfigError,
    ExperimentConfig,
    MetricsTable,
    MissModel,
    QueryOutcome,
    paired_ttest,
    recall_at_m,
    run_experiment,
    run_query,
)

__version__ = "0.1.0"
