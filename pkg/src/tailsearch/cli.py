"""Command-line interface.

Subcommands: run an experiment grid from a JSON config, run the
verification property suites, evaluate a success probability, dump a
partition assignment, profile estimated shard distributions, and run the
prebuilt figure suites.  Exit codes: 0 success, 1 usage or configuration
error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .analysis import sp_closed_form, verify_properties
from .corpus import CorpusError, SyntheticCorpusSpec
from .harness import FigureSuiteConfig, profile_distribution, run_figure_suite
from .partition import iter_assignment_rows
from .selection import Selection, SelectionError
from .shard_index import SuccessDistribution, estimate_distribution, sample_shard_indexes
from .simulator import (
    ConfigError,
    ExperimentConfig,
    run_experiment,
    validate_config,
    _build_deployment,
    _prepare_corpus,
    _prepare_queries,
)

OUTPUT_DIR_ENV = "TAILSEARCH_OUTPUT_DIR"

_CONFIG_KEYS = {
    "corpus",
    "queries",
    "n_queries",
    "lsh_bits",
    "lsh_dim",
    "r",
    "t_values",
    "f_values",
    "schemes",
    "deployment_kinds",
    "m",
    "k_per_shard",
    "gamma",
    "sample_prob",
    "stopwords",
    "seed",
    "repeats",
    "workers",
    "output_dir",
}

_SYNTHETIC_KEYS = {"n_docs", "vocab_size", "n_clusters", "doc_len_mean", "seed"}


def load_config(path: str) -> tuple[ExperimentConfig, str | None]:
    """Parse a JSON config file into an ExperimentConfig.

    Returns the config and the optional output_dir it names.  Raises
    ConfigError naming every malformed field.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError("config must be a single JSON object")
    unknown = set(payload) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    corpus = payload.get("corpus")
    if corpus is not None:
        if not isinstance(corpus, dict):
            raise ConfigError("corpus: must be an object")
        if "path" in corpus and "synthetic" not in corpus:
            kwargs["corpus_path"] = corpus["path"]
        elif "synthetic" in corpus and "path" not in corpus:
            synth = corpus["synthetic"]
            if not isinstance(synth, dict):
                raise ConfigError("corpus.synthetic: must be an object")
            unknown = set(synth) - _SYNTHETIC_KEYS
            if unknown:
                raise ConfigError(
                    f"corpus.synthetic: unknown keys {sorted(unknown)}"
                )
            missing = _SYNTHETIC_KEYS - {"seed"} - set(synth)
            if missing:
                raise ConfigError(
                    f"corpus.synthetic: missing keys {sorted(missing)}"
                )
            kwargs["synthetic"] = SyntheticCorpusSpec(**synth)
        else:
            raise ConfigError("corpus: give exactly one of 'path' or 'synthetic'")
    if "queries" in payload:
        kwargs["query_path"] = payload["queries"]
    for key in (
        "n_queries",
        "lsh_bits",
        "lsh_dim",
        "r",
        "m",
        "k_per_shard",
        "gamma",
        "sample_prob",
        "seed",
        "repeats",
        "workers",
    ):
        if key in payload:
            kwargs[key] = payload[key]
    for key in ("t_values", "f_values", "schemes", "deployment_kinds", "stopwords"):
        if key in payload:
            value = payload[key]
            if not isinstance(value, list):
                raise ConfigError(f"{key}: must be a list")
            kwargs[key] = tuple(value)
    try:
        config = ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    problems = validate_config(config)
    if problems:
        raise ConfigError("; ".join(problems))
    return config, payload.get("output_dir")


def _resolve_out_dir(cli_out, config_out) -> str:
    return cli_out or os.environ.get(OUTPUT_DIR_ENV) or config_out or "."


def cmd_experiment(args) -> int:
    config, config_out = load_config(args.config)
    out_dir = _resolve_out_dir(args.out, config_out)
    os.makedirs(out_dir, exist_ok=True)
    table = run_experiment(config)
    metrics_path = os.path.join(out_dir, "metrics.csv")
    with open(metrics_path, "w", encoding="utf-8") as fh:
        fh.write(table.to_csv())
    print(metrics_path)
    if args.per_query:
        detail_path = os.path.join(out_dir, "per_query.csv")
        with open(detail_path, "w", encoding="utf-8") as fh:
            fh.write(table.per_query_csv())
        print(detail_path)
    return 0


def cmd_verify(args) -> int:
    reports = verify_properties(level=args.level, seed=args.seed)
    failed = False
    for report in reports:
        status = "PASS" if report.passed else "FAIL"
        print(
            f"{status} {report.name}: worst margin {report.worst_margin:.3e} "
            f"(limit {report.limit:.3e}); {report.detail}"
        )
        failed = failed or not report.passed
    return 2 if failed else 0


def _parse_probabilities(text: str) -> SuccessDistribution:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"--p: {exc}") from exc
    if not values:
        raise ConfigError("--p: need at least one probability")
    if abs(sum(values) - 1.0) > 1e-9:
        raise ConfigError(f"--p: probabilities sum to {sum(values)}, not 1")
    try:
        return SuccessDistribution(values)
    except ValueError as exc:
        raise ConfigError(f"--p: {exc}") from exc


def _parse_selection(text: str, n: int, r: int | None) -> Selection:
    """Parse shard picks like ``D1x2,D3``: shard D<i> chosen <count> times.

    Shard numbering in this notation is 1-based; the result is the
    canonical selection with those replica counts.
    """
    counts = [0] * n
    for raw_entry in text.split(","):
        entry = raw_entry.strip()
        if not entry:
            continue
        body = entry[1:] if entry[:1] in ("D", "d") else entry
        shard_text, _, count_text = body.partition("x")
        try:
            shard = int(shard_text)
            count = int(count_text) if count_text else 1
        except ValueError as exc:
            raise ConfigError(f"--select: cannot parse entry {entry!r}") from exc
        if not 1 <= shard <= n:
            raise ConfigError(
                f"--select: shard D{shard} outside 1..{n} (given {n} probabilities)"
            )
        if count < 1:
            raise ConfigError(f"--select: count must be >= 1 in {entry!r}")
        counts[shard - 1] += count
    budget = sum(counts)
    if budget < 1:
        raise ConfigError("--select: selection is empty")
    replicas = r if r is not None else max(counts)
    if max(counts) > replicas:
        raise ConfigError(
            f"--select: shard chosen {max(counts)} times exceeds r={replicas} "
            "replicas; no valid replica assignment exists"
        )
    return Selection.from_replica_counts(counts, replicas)


def cmd_sp(args) -> int:
    dist = _parse_probabilities(args.p)
    selection = _parse_selection(args.select, dist.n, args.r)
    try:
        result = sp_closed_form(dist, selection, args.f)
    except (SelectionError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    print(f"{result.value:.6f}")
    return 0


def cmd_partition_dump(args) -> int:
    config, config_out = load_config(args.config)
    _raw, _stats, weighted = _prepare_corpus(config)
    deployment = _build_deployment(config.deployment_kinds[0], weighted, config)
    out_path = args.out or os.path.join(
        _resolve_out_dir(None, config_out), "partition_dump.csv"
    )
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write("doc_id,partition_index,shard_index\n")
        for doc_id, partition, shard in iter_assignment_rows(deployment):
            fh.write(f"{doc_id},{partition},{shard}\n")
    print(out_path)
    return 0


def cmd_profile_dist(args) -> int:
    config, config_out = load_config(args.config)
    raw, stats, weighted = _prepare_corpus(config)
    queries = _prepare_queries(config, raw, stats)
    if not queries:
        raise ConfigError("queries: query set is empty, nothing to profile")
    deployment = _build_deployment(config.deployment_kinds[0], weighted, config)
    sampled = sample_shard_indexes(
        deployment, weighted, config.sample_prob, config.seed
    )
    dists = [estimate_distribution(sampled[0], q, config.gamma) for q in queries]
    top_k = min(args.top_k, deployment.n)
    profile = profile_distribution(dists, top_k)
    lines = ["rank,estimated_mean_p,uniform_p"]
    for rank, value in enumerate(profile, start=1):
        lines.append(f"{rank},{value:.6f},{1.0 / deployment.n:.6f}")
    content = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(content)
        print(args.out)
    else:
        print(content, end="")
    return 0


def cmd_figures(args) -> int:
    config = FigureSuiteConfig(seed=args.seed, workers=args.workers)
    out_dir = _resolve_out_dir(args.out, None)
    for path in run_figure_suite(config, out_dir):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tailsearch",
        description="Tail-tolerant distributed search simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_exp = sub.add_parser("experiment", help="run an experiment grid from a config")
    p_exp.add_argument("--config", required=True, help="JSON config file")
    p_exp.add_argument("--out", help="output directory (default: env or config)")
    p_exp.add_argument(
        "--per-query", action="store_true", help="also write per-query recalls"
    )
    p_exp.set_defaults(func=cmd_experiment)

    p_verify = sub.add_parser("verify", help="run the analysis property suites")
    p_verify.add_argument("--level", choices=("quick", "full"), default="quick")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(func=cmd_verify)

    p_sp = sub.add_parser("sp", help="closed-form success probability")
    p_sp.add_argument(
        "--p", required=True, help="comma-separated shard probabilities"
    )
    p_sp.add_argument(
        "--select",
        required=True,
        help="selection, e.g. D1x2,D3 (1-based shards, xN for N replicas)",
    )
    p_sp.add_argument("--f", type=float, required=True, help="miss probability")
    p_sp.add_argument("--r", type=int, help="replica count (default: max count)")
    p_sp.set_defaults(func=cmd_sp)

    p_dump = sub.add_parser("partition-dump", help="dump shard assignments")
    p_dump.add_argument("--config", required=True)
    p_dump.add_argument("--out", help="output CSV path")
    p_dump.set_defaults(func=cmd_partition_dump)

    p_profile = sub.add_parser(
        "profile-dist", help="profile estimated shard distributions"
    )
    p_profile.add_argument("--config", required=True)
    p_profile.add_argument("--top-k", type=int, default=5)
    p_profile.add_argument("--out", help="output CSV path")
    p_profile.set_defaults(func=cmd_profile_dist)

    p_fig = sub.add_parser("figures", help="run the prebuilt figure suites")
    p_fig.add_argument("--out", help="output directory")
    p_fig.add_argument("--seed", type=int, default=0)
    p_fig.add_argument("--workers", type=int, default=1)
    p_fig.set_defaults(func=cmd_figures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CorpusError, SelectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
