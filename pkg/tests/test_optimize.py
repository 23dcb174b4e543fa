import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from hetnet_feedback import figures
from hetnet_feedback.model import FeedbackAllocation, NetworkConfig, TierParams, make_network
from hetnet_feedback.optimize import (
    effective_cluster_size,
    equal_partition_coop,
    equal_partition_noncoop,
    expected_log_deltas,
    integer_round,
    intra_cluster_product,
    line_search_general,
    lower_bound_marginals,
    partition_coop,
    partition_coop_general,
    partition_noncoop,
    partition_single_tier_expected,
    single_tier_expected_bits,
)

FIG1A = figures.fig1_config("a")


class TestTierPartition:
    def test_identical_tiers_split_evenly(self):
        cfg = NetworkConfig([TierParams(2.0, 1.0, 1.0, 4)] * 3, 4.0)
        res = partition_noncoop(cfg, 60.0)
        np.testing.assert_allclose(res.allocation.bits, [10.0] * 3, rtol=1e-9)

    def test_budget_binds_and_marginals_equalize(self):
        for cfg in (FIG1A, figures.fig1_config("b")):
            for per_bs in (2.0, 10.0, 20.0):
                budget = per_bs * cfg.densities.sum()
                res = partition_noncoop(cfg, budget)
                a = res.allocation
                assert np.dot(cfg.densities, a.bits) == pytest.approx(budget, rel=1e-9)
                active = list(res.active_set)
                m = lower_bound_marginals(cfg, a.bits)[active]
                np.testing.assert_allclose(m, m[0], rtol=1e-6)
                np.testing.assert_allclose(m, 1.0 / res.multiplier, rtol=1e-6)

    def test_zero_budget(self):
        res = partition_noncoop(FIG1A, 0.0)
        assert res.allocation.bits == (0.0, 0.0, 0.0)

    def test_inactive_tier_gets_nothing(self):
        # a tier drowned in interference waits until the water level reaches it
        cfg = make_network((0.5, 5.0, 40.0), (46.0, 15.0, 10.0), (0.0, 3.0, 20.0), (2, 8, 8))
        res = partition_noncoop(cfg, 10.0)
        bits = np.array(res.allocation.bits)
        assert res.active_set == (0, 1)
        assert bits[2] == 0.0
        assert np.dot(cfg.densities, bits) == pytest.approx(10.0, rel=1e-9)
        assert 2 in partition_noncoop(cfg, 50.0).active_set

    def test_equal_partition_definition(self):
        eq = equal_partition_noncoop(FIG1A, 300.0)
        np.testing.assert_allclose(eq.bits, [300 / 3 / 0.5, 300 / 3 / 5, 300 / 3 / 40])
        assert eq.used == pytest.approx(300.0)

    def test_gain_at_ten_bits_per_bs(self):
        row = figures.noncoop_point(FIG1A, 10.0)
        assert row["gain_pct"] == pytest.approx(11.83, abs=0.05)


class TestClusterPartition:
    def test_hand_example_and_rounding(self):
        a = partition_coop([0.2, 0.04, 0.008], 4, 30.0)
        np.testing.assert_allclose(a.bits, [10 + 3 * math.log2(5), 10.0, 10 - 3 * math.log2(5)], atol=1e-12)
        np.testing.assert_allclose(a.bits, [16.966, 10.0, 3.034], atol=5e-4)
        assert integer_round(a).bits == (17.0, 10.0, 3.0)

    def test_clamping(self):
        a = partition_coop([0.2, 0.04, 0.008], 4, 12.0)
        assert a.bits[2] == 0.0
        assert sum(a.bits) == pytest.approx(12.0)
        raw = partition_coop([0.2, 0.04, 0.008], 4, 12.0, clamp=False)
        assert raw.bits[2] == pytest.approx(4 - 3 * math.log2(5))

    def test_uniform_deltas(self):
        np.testing.assert_allclose(partition_coop([0.1] * 4, 5, 10.0).bits, [2.5] * 4)

    def test_equal_partition(self):
        assert equal_partition_coop(4, 12.0).bits == (4.0, 4.0, 4.0)

    def test_fig2_allocations(self):
        a = partition_coop(figures.fig2_bundle("a").cluster.deltas, 4, 10.0)
        np.testing.assert_allclose(a.bits, [9.98289, 0.01711, 0.0], atol=1e-5)


@settings(max_examples=60, deadline=None)
@given(
    deltas=st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=6),
    budget=st.floats(0.0, 60.0),
    scale=st.floats(1e-3, 1e3),
)
def test_cluster_partition_properties(deltas, budget, scale):
    L = len(deltas) + 1
    a = partition_coop(deltas, L, budget)
    assert sum(a.bits) == pytest.approx(budget, abs=1e-9 * max(1, budget))
    assert min(a.bits) >= 0.0
    b = partition_coop([d * scale for d in deltas], L, budget)
    np.testing.assert_allclose(a.bits, b.bits, atol=1e-9 * max(1, budget))
    # the threshold plays no role in the log-linear split, but the product favours it
    eq = equal_partition_coop(L, budget)
    for g in (0.5, 5.0):
        assert intra_cluster_product(g, deltas, a.bits, L) >= intra_cluster_product(g, deltas, eq.bits, L) - 1e-12


@settings(max_examples=40, deadline=None)
@given(deltas=st.lists(st.floats(1e-4, 1.0), min_size=2, max_size=5), budget=st.floats(1.0, 40.0))
def test_cluster_partition_beats_equal_split_in_log_objective(deltas, budget):
    assume(max(deltas) / min(deltas) > 1.01)
    L = len(deltas) + 1
    d = np.array(deltas)

    def objective(bits):
        # log-linearized intra-cluster interference the split minimizes
        return float(np.sum(d * 2.0 ** (-np.asarray(bits) / (L - 1))))

    assert objective(partition_coop(deltas, L, budget).bits) < objective(equal_partition_coop(L, budget).bits)


class TestGeneralAntennas:
    def test_symmetric_split(self):
        a = partition_coop_general([0.1, 0.1, 0.1], [6, 6, 6], 12.0, 10.0, home_bits=3.0)
        np.testing.assert_allclose(a.bits, [3.0, 3.0, 3.0], rtol=1e-8)
        assert a.budget == 9.0

    def test_threshold_changes_split_when_antennas_differ(self):
        d, n = [0.1, 0.08, 0.05], [6, 8, 4]
        a = partition_coop_general(d, n, 16.0, 1.0)
        b = partition_coop_general(d, n, 16.0, 100.0)
        assert not np.allclose(a.bits, b.bits)
        for x in (a, b):
            assert sum(x.bits) == pytest.approx(16.0)

    def test_home_bits_bounds(self):
        with pytest.raises(ValueError):
            partition_coop_general([0.1, 0.1], [4, 4], 4.0, 1.0, home_bits=5.0)

    def test_line_search_zero_budget(self):
        res = line_search_general([0.1, 0.01], [4, 4], 0, lambda h, b: 1.0)
        assert res.home_bits == 0 and res.allocation.bits == (0.0, 0.0)

    def test_line_search_picks_evaluator_argmax(self):
        # a synthetic evaluator that rewards home bits up to 5 and then penalizes them
        def evaluator(home, bits):
            return -abs(home - 5) + 0.01 * bits[0]

        res = line_search_general([0.1, 0.01, 0.001], [6, 4, 8], 8, evaluator, max_workers=3)
        assert res.home_bits == 5
        assert sum(res.allocation.bits) == 3
        assert all(float(b).is_integer() for b in res.allocation.bits)
        serial = line_search_general([0.1, 0.01, 0.001], [6, 4, 8], 8, evaluator)
        assert serial.table == res.table


class TestSingleTierExpected:
    def test_hand_example(self):
        a = partition_single_tier_expected(3, 4.0, 10.0)
        np.testing.assert_allclose(a.bits, [6.442, 3.558], atol=1e-3)
        assert integer_round(a).bits == (6.0, 4.0)

    def test_two_members(self):
        assert partition_single_tier_expected(2, 4.0, 7.0).bits == (7.0,)

    def test_expected_log_deltas(self):
        np.testing.assert_allclose(expected_log_deltas(3, 4.0), [-4 / (2 * math.log(2)), -6 / (2 * math.log(2))])

    @settings(max_examples=50, deadline=None)
    @given(L=st.integers(2, 12), beta=st.floats(2.1, 6.0), budget=st.floats(0.0, 200.0))
    def test_sums_and_ordering(self, L, beta, budget):
        raw = single_tier_expected_bits(L, beta, budget)
        assert raw.sum() == pytest.approx(budget, abs=1e-9 * max(1.0, budget))
        assert np.all(np.diff(raw) <= 1e-12)
        clamped = partition_single_tier_expected(L, beta, budget).bits
        assert sum(clamped) == pytest.approx(budget, abs=1e-9 * max(1.0, budget))
        assert min(clamped) >= 0.0
        assert np.all(np.diff(clamped) <= 1e-12)


class TestEffectiveClusterSize:
    def test_hand_values(self):
        est = effective_cluster_size(100.0, 4.0)
        assert est.lower_bound == pytest.approx(6.72, abs=5e-3)
        assert est.asymptotic == 5.0

    @pytest.mark.parametrize("budget", [50.0, 100.0, 500.0])
    @pytest.mark.parametrize("beta", [3.0, 4.0, 6.0])
    def test_exact_scan_above_bound(self, budget, beta):
        est = effective_cluster_size(budget, beta)
        assert est.exact >= est.lower_bound

    def test_exact_scan_definition(self):
        est = effective_cluster_size(100.0, 4.0)
        assert single_tier_expected_bits(est.exact, 4.0, 100.0)[-1] <= 1.0
        assert single_tier_expected_bits(est.exact - 1, 4.0, 100.0)[-1] > 1.0


class TestIntegerRound:
    def test_integer_input_unchanged(self):
        a = FeedbackAllocation((3.0, 5.0, 2.0), 10.0)
        assert integer_round(a).bits == (3.0, 5.0, 2.0)
        assert integer_round(a, strategy="greedy", evaluator=lambda b: float(np.sum(b))).bits == (3.0, 5.0, 2.0)

    def test_greedy_adds_where_gain_is_largest(self):
        deltas = np.array([0.2, 0.04])
        L = 3

        def evaluator(bits):
            return -float(np.sum(deltas * 2.0 ** (-np.asarray(bits) / (L - 1))))

        a = integer_round(FeedbackAllocation((6.442, 3.558), 10.0), evaluator=evaluator)
        assert a.bits == (7.0, 3.0)

    def test_round_respects_weighted_budget(self):
        a = FeedbackAllocation((1.6, 2.6), 8.0, weights=(1.0, 2.0), weighting="density")
        out = integer_round(a)
        assert out.is_integer() and out.is_feasible()

    @settings(max_examples=60, deadline=None)
    @given(
        bits=st.lists(st.floats(0.0, 30.0), min_size=1, max_size=6),
        weights=st.lists(st.floats(0.1, 10.0), min_size=6, max_size=6),
        strategy=st.sampled_from(["round", "greedy"]),
    )
    def test_feasible_integer_output(self, bits, weights, strategy):
        w = weights[:len(bits)]
        budget = float(np.dot(w, bits))
        evaluator = (lambda b: float(np.sum(np.log1p(b)))) if strategy == "greedy" else None
        out = integer_round(FeedbackAllocation(bits, budget, tuple(w), "density"),
                            evaluator=evaluator, strategy=strategy)
        assert out.is_integer()
        assert out.is_feasible()
        assert min(out.bits) >= 0
