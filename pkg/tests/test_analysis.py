"""Closed-form success probability, Monte Carlo, and the oracle suite."""

import math

import numpy as np
import pytest

from tailsearch.analysis import (
    BRUTE_FORCE_LIMIT,
    brute_force_best_selection,
    compare_replication_repartition,
    sp_closed_form,
    sp_from_replica_counts,
    sp_monte_carlo,
    verify_properties,
)
from tailsearch.selection import Selection, SelectionError, select_rsmartred
from tailsearch.shard_index import SuccessDistribution, uniform_distribution


def dist_of(*probs):
    return SuccessDistribution(np.array(probs))


# Two shards carry 0.8 and 0.1 of the success mass; the remainder is noise.
GOLDEN_DIST = dist_of(0.8, 0.1, 0.1)
DOUBLE_FIRST = Selection.from_replica_counts([2, 0, 0], r=2)
SPREAD_TWO = Selection.from_replica_counts([1, 1, 0], r=2)


class TestClosedFormGoldens:
    """Four hand-checkable values: (1 - f) * sum over levels of f^i * mass."""

    @pytest.mark.parametrize(
        "selection,miss,expected,display",
        [
            (DOUBLE_FIRST, 0.05, 0.798, 0.80),
            (SPREAD_TWO, 0.05, 0.855, 0.85),
            (DOUBLE_FIRST, 0.20, 0.768, 0.77),
            (SPREAD_TWO, 0.20, 0.720, 0.72),
        ],
    )
    def test_value_and_two_decimal_display(self, selection, miss, expected, display):
        result = sp_closed_form(GOLDEN_DIST, selection, miss)
        assert result.method == "closed_form"
        assert abs(result.value - expected) <= 1e-12
        assert round(result.value, 2) == display


class TestClosedFormEdges:
    def test_no_miss_is_selected_mass(self):
        sel = Selection.from_replica_counts([1, 0, 1], r=2)
        assert sp_closed_form(GOLDEN_DIST, sel, 0.0).value == pytest.approx(
            0.9, abs=1e-15
        )

    def test_certain_miss_is_zero(self):
        sel = Selection.from_replica_counts([2, 1, 0], r=2)
        assert sp_closed_form(GOLDEN_DIST, sel, 1.0).value == 0.0

    def test_full_grid_reaches_complement_of_all_missing(self):
        sel = Selection.from_replica_counts([3, 3, 3], r=3)
        # every shard triple-covered: SP = 1 - f^3
        assert sp_closed_form(GOLDEN_DIST, sel, 0.4).value == pytest.approx(
            1.0 - 0.4**3, abs=1e-12
        )

    def test_non_canonical_selection_rejected(self):
        ragged = Selection(n=3, r=2, chosen=frozenset({(1, 0)}))
        with pytest.raises(SelectionError, match="canonical"):
            sp_closed_form(GOLDEN_DIST, ragged, 0.1)
        assert sp_closed_form(GOLDEN_DIST, ragged.canonical(), 0.1).value > 0.0

    def test_shard_count_mismatch_rejected(self):
        sel = Selection.from_replica_counts([1, 1], r=1)
        with pytest.raises(SelectionError):
            sp_closed_form(GOLDEN_DIST, sel, 0.1)

    def test_miss_prob_range_checked(self):
        sel = Selection.from_replica_counts([1, 0, 0], r=1)
        for bad in (-0.1, 1.0001):
            with pytest.raises(ValueError):
                sp_closed_form(GOLDEN_DIST, sel, bad)

    def test_returns_plain_float(self):
        sel = Selection.from_replica_counts([1, 1, 0], r=2)
        value = sp_closed_form(GOLDEN_DIST, sel, 0.05).value
        assert type(value) is float


class TestPerShardForm:
    def test_matches_level_form_on_random_selections(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            n = int(rng.integers(1, 9))
            r = int(rng.integers(1, 5))
            counts = rng.integers(0, r + 1, size=n)
            if counts.sum() == 0:
                counts[0] = 1
            sel = Selection.from_replica_counts(counts.tolist(), r=r)
            raw = rng.random(n) + 1e-9
            dist = SuccessDistribution(raw / raw.sum())
            miss = float(rng.choice([0.0, 1.0, rng.uniform()]))
            assert abs(
                sp_closed_form(dist, sel, miss).value
                - sp_from_replica_counts(dist, counts, miss)
            ) <= 1e-12

    def test_length_mismatch_rejected(self):
        with pytest.raises(SelectionError):
            sp_from_replica_counts(GOLDEN_DIST, [1, 0], 0.1)


class TestMonteCarlo:
    def test_zero_miss_counts_selected_mass_exactly(self):
        sel = Selection.from_replica_counts([1, 1, 0], r=2)
        result = sp_monte_carlo(GOLDEN_DIST, sel, 0.0, trials=2000, seed=0)
        assert result.method == "monte_carlo"
        assert result.trials == 2000
        # without misses every trial is decided by answer placement alone
        assert result.value == pytest.approx(0.9, abs=0.03)

    def test_certain_miss_never_succeeds(self):
        sel = Selection.from_replica_counts([2, 2, 2], r=2)
        assert sp_monte_carlo(GOLDEN_DIST, sel, 1.0, trials=500, seed=1).value == 0.0

    def test_std_error_formula(self):
        sel = Selection.from_replica_counts([1, 0, 0], r=1)
        result = sp_monte_carlo(GOLDEN_DIST, sel, 0.3, trials=10_000, seed=2)
        expected_se = math.sqrt(result.value * (1.0 - result.value) / 10_000)
        assert result.std_error == pytest.approx(expected_se, rel=1e-12)

    def test_deterministic_per_seed(self):
        sel = Selection.from_replica_counts([2, 1, 0], r=2)
        a = sp_monte_carlo(GOLDEN_DIST, sel, 0.25, trials=5000, seed=7)
        b = sp_monte_carlo(GOLDEN_DIST, sel, 0.25, trials=5000, seed=7)
        assert a.value == b.value

    def test_repartition_uses_per_partition_distributions(self):
        # partition 1 concentrates on shard 2, which only it selects
        dists = [dist_of(1.0, 0.0, 0.0), dist_of(0.0, 0.0, 1.0)]
        sel = Selection(n=3, r=2, chosen=frozenset({(1, 2)}))
        result = sp_monte_carlo(
            dists, sel, 0.0, kind="repartition", trials=2000, seed=3
        )
        assert result.value == 1.0

    def test_validation(self):
        sel = Selection.from_replica_counts([1, 0, 0], r=1)
        with pytest.raises(ValueError):
            sp_monte_carlo(GOLDEN_DIST, sel, 0.1, kind="hybrid")
        with pytest.raises(ValueError):
            sp_monte_carlo(GOLDEN_DIST, sel, 0.1, trials=0)
        with pytest.raises(ValueError):
            sp_monte_carlo([GOLDEN_DIST] * 3, sel, 0.1)


class TestBruteForce:
    def test_hand_instance(self):
        # budget 2, r 2: doubling shard 0 (0.8 * (1 - f^2)) beats spreading
        # (1 - f)(0.8 + 0.1) once f is large enough; at f = 0.5 doubling
        # gives 0.6 vs 0.45.
        dist = GOLDEN_DIST
        best, result = brute_force_best_selection(dist, 0.5, r=2, budget=2)
        assert best.replica_counts().tolist() == [2, 0, 0]
        assert result.value == pytest.approx(0.6, abs=1e-12)

    def test_spreading_wins_at_low_miss(self):
        # (1 - 0.05) * (0.8 + 0.15) = 0.9025 beats 0.8 * (1 - 0.05^2) = 0.798
        dist = dist_of(0.8, 0.15, 0.05)
        best, result = brute_force_best_selection(dist, 0.05, r=2, budget=2)
        assert best.replica_counts().tolist() == [1, 1, 0]
        assert result.value == pytest.approx(0.9025, abs=1e-12)

    def test_matches_miss_aware_scheme(self):
        rng = np.random.default_rng(4)
        for _ in range(60):
            n = int(rng.integers(2, 6))
            r = int(rng.integers(1, 4))
            budget = int(rng.integers(1, n * r + 1))
            raw = rng.random(n) + 1e-9
            dist = SuccessDistribution(raw / raw.sum())
            miss = float(rng.integers(0, 20)) / 20.0
            scheme = select_rsmartred(dist, miss, r, budget)
            _, best = brute_force_best_selection(dist, miss, r, budget)
            assert sp_closed_form(dist, scheme, miss).value == pytest.approx(
                best.value, abs=1e-12
            )

    def test_too_large_instance_refused(self):
        big = uniform_distribution(40)
        with pytest.raises(ValueError, match="brute force"):
            brute_force_best_selection(big, 0.1, r=3, budget=60)
        assert math.comb(120, 60) > BRUTE_FORCE_LIMIT

    def test_budget_validation(self):
        with pytest.raises(SelectionError):
            brute_force_best_selection(GOLDEN_DIST, 0.1, r=2, budget=0)
        with pytest.raises(SelectionError):
            brute_force_best_selection(GOLDEN_DIST, 0.1, r=2, budget=7)


class TestCompareDeployments:
    def test_repartition_never_loses(self):
        rng = np.random.default_rng(11)
        for _ in range(6):
            n = int(rng.integers(3, 7))
            raw = rng.random(n) + 1e-9
            dist = SuccessDistribution(raw / raw.sum())
            miss = float(rng.uniform(0.05, 0.4))
            budget = int(rng.integers(2, 2 * n + 1))
            replication, repartition = compare_replication_repartition(
                dist, miss, r=2, budget=budget, trials=30_000,
                seed=int(rng.integers(2**63)),
            )
            slack = 3.0 * max(repartition.std_error, 1e-12)
            assert repartition.value >= replication.value - slack


class TestVerifyProperties:
    def test_quick_suite_passes(self):
        reports = verify_properties("quick", seed=0)
        assert len(reports) == 5
        for report in reports:
            assert report.passed, f"{report.name}: {report.detail}"

    def test_unknown_level_rejected(self):
        with pytest.raises(ValueError):
            verify_properties("paranoid")

    def test_optimality_check_catches_a_broken_scheme(self, monkeypatch):
        """The oracle must flag a selection scheme that ignores miss rate."""
        import tailsearch.selection as selection_mod

        def worst_first(dist, miss_prob, r, budget):
            order = sorted(range(dist.n), key=lambda j: (dist.p[j], j))
            counts = [0] * dist.n
            remaining = budget
            for j in order:
                take = min(r, remaining)
                counts[j] = take
                remaining -= take
                if remaining == 0:
                    break
            return Selection.from_replica_counts(counts, r)

        monkeypatch.setattr(selection_mod, "select_rsmartred", worst_first)
        reports = verify_properties("quick", seed=0)
        by_name = {report.name: report for report in reports}
        assert not by_name["miss-aware selection matches brute-force optimum"].passed
