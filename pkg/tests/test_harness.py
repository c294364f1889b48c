"""Query strata, distribution profiles, and the prebuilt figure suites."""

import numpy as np
import pytest

from tailsearch.corpus import SyntheticCorpusSpec
from tailsearch.harness import (
    DEFAULT_STRATA,
    FigureSuiteConfig,
    figure_csv,
    pivot_csv,
    profile_distribution,
    run_figure_suite,
    stratify_queries,
)
from tailsearch.shard_index import SuccessDistribution, uniform_distribution
from tailsearch.simulator import CSV_HEADER, MetricsRow, MetricsTable


def dist_of(*probs):
    return SuccessDistribution(np.array(probs))


TINY_SUITE = FigureSuiteConfig(
    corpus=SyntheticCorpusSpec(
        n_docs=150, vocab_size=400, n_clusters=8, doc_len_mean=8.0, seed=2
    ),
    lsh_bits=4,
    r=3,
    n_queries=8,
    m=10,
    k_per_shard=10,
    repeats=2,
    seed=1,
)


class TestStratifyQueries:
    def test_strata_form_a_chain(self):
        dists = [
            dist_of(0.9, 0.1),
            dist_of(0.6, 0.4),
            dist_of(0.5, 0.5),
        ]
        strata = stratify_queries(["a", "b", "c"], dists)
        assert strata["Whole"] == ["a", "b", "c"]
        assert strata["Skewed"] == ["a", "b"]
        assert strata["MostSkewed"] == ["a"]

    def test_threshold_is_strict(self):
        strata = stratify_queries(["q"], [dist_of(0.5, 0.5)])
        assert strata["Skewed"] == []

    def test_whole_matches_everything(self):
        dists = [uniform_distribution(16) for _ in range(5)]
        strata = stratify_queries([f"q{i}" for i in range(5)], dists)
        assert len(strata["Whole"]) == 5

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            stratify_queries(["a", "b"], [dist_of(1.0)])


class TestProfileDistribution:
    def test_hand_example(self):
        profile = profile_distribution(
            [dist_of(0.5, 0.3, 0.2), dist_of(0.2, 0.2, 0.6)], top_k=2
        )
        assert np.allclose(profile, [0.55, 0.25])

    def test_nonincreasing(self):
        rng = np.random.default_rng(3)
        dists = [
            SuccessDistribution(rng.dirichlet(np.ones(8))) for _ in range(40)
        ]
        profile = profile_distribution(dists, top_k=8)
        assert np.all(np.diff(profile) <= 1e-15)

    def test_validation(self):
        with pytest.raises(ValueError):
            profile_distribution([], top_k=1)
        with pytest.raises(ValueError):
            profile_distribution([dist_of(1.0)], top_k=0)
        with pytest.raises(ValueError):
            profile_distribution([dist_of(1.0)], top_k=2)


def _table_with_rows(rows):
    return MetricsTable(rows=rows, samples={}, query_ids=(), repeats=1)


def _row(scheme, kind, f, t, mean):
    return MetricsRow(
        scheme=scheme,
        deployment=kind,
        f=f,
        t=t,
        r=3,
        budget=t * 3,
        recall_mean=mean,
        recall_std=0.0,
        n_queries=4,
        seed=0,
    )


class TestFigureCsv:
    def test_prepends_figure_column(self):
        table = _table_with_rows([_row("NoRed", "replication", 0.1, 5, 0.75)])
        text = figure_csv("f_sweep", [table])
        lines = text.strip().split("\n")
        assert lines[0] == "figure," + CSV_HEADER
        assert lines[1].startswith("f_sweep,NoRed,replication,0.1,5,3,15,0.750000")


class TestPivotCsv:
    def test_one_column_per_series(self):
        tables = [
            _table_with_rows(
                [
                    _row("NoRed", "replication", 0.0, 5, 0.9),
                    _row("NoRed", "replication", 0.2, 5, 0.7),
                    _row("rSmartRed", "replication", 0.0, 5, 0.95),
                ]
            )
        ]
        text = pivot_csv(tables, "f")
        lines = text.strip().split("\n")
        assert lines[0] == "f,NoRed(replication),rSmartRed(replication)"
        assert lines[1] == "0,0.900000,0.950000"
        # a missing cell stays empty rather than inventing a value
        assert lines[2] == "0.2,0.700000,"

    def test_x_values_sorted(self):
        tables = [
            _table_with_rows(
                [
                    _row("NoRed", "replication", 0.0, 8, 0.8),
                    _row("NoRed", "replication", 0.0, 3, 0.6),
                ]
            )
        ]
        lines = pivot_csv(tables, "t").strip().split("\n")
        assert [line.split(",")[0] for line in lines[1:]] == ["3", "8"]


@pytest.fixture(scope="module")
def suite_dir(tmp_path_factory):
    out_dir = tmp_path_factory.mktemp("suite")
    paths = run_figure_suite(TINY_SUITE, str(out_dir))
    return out_dir, paths


class TestFigureSuite:
    def test_writes_every_artifact(self, suite_dir):
        out_dir, paths = suite_dir
        names = sorted(p.rsplit("/", 1)[-1] for p in paths)
        assert names == [
            "budget_sweep.csv",
            "budget_sweep_plot.csv",
            "deployment_comparison.csv",
            "deployment_comparison_plot.csv",
            "distribution_profile.csv",
            "f_sweep.csv",
            "f_sweep_plot.csv",
            "query_strata.csv",
        ]
        for path in paths:
            with open(path, encoding="utf-8") as fh:
                assert fh.readline().strip()

    def test_profile_and_strata_contents(self, suite_dir):
        out_dir, _ = suite_dir
        profile_lines = (out_dir / "distribution_profile.csv").read_text().strip()
        rows = profile_lines.split("\n")
        assert rows[0] == "rank,estimated_mean_p,uniform_p"
        values = [float(line.split(",")[1]) for line in rows[1:]]
        assert values == sorted(values, reverse=True)
        strata_rows = (
            (out_dir / "query_strata.csv").read_text().strip().split("\n")[1:]
        )
        counts = {line.split(",")[0]: int(line.split(",")[2]) for line in strata_rows}
        assert counts["Whole"] == TINY_SUITE.n_queries
        assert counts["Whole"] >= counts["Skewed"] >= counts["MostSkewed"]

    def test_figure_column_present(self, suite_dir):
        out_dir, _ = suite_dir
        for name in ("f_sweep", "budget_sweep", "deployment_comparison"):
            lines = (out_dir / f"{name}.csv").read_text().strip().split("\n")
            assert lines[0].startswith("figure,")
            assert all(line.startswith(name + ",") for line in lines[1:])

    def test_suite_is_deterministic(self, suite_dir, tmp_path):
        out_dir, _ = suite_dir
        rerun_dir = tmp_path / "rerun"
        run_figure_suite(TINY_SUITE, str(rerun_dir))
        for path in sorted(out_dir.iterdir()):
            assert (rerun_dir / path.name).read_bytes() == path.read_bytes()
