import math
from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, strategies as st

from chartfolio.backtest import (
    BacktestConfig,
    Policy,
    TradeOpportunity,
    build_opportunities,
    load_opportunities_csv,
    parse_policy,
    position_size,
    random_policy,
    run_daily_batch,
    run_sequential,
    write_opportunities_csv,
)
from chartfolio.dataset import ClassLabel, make_sample
from chartfolio.errors import InputError
from chartfolio.rng import stream

DAY = date(2022, 1, 3)


def opp(sid, p_open, p_close, true_label=ClassLabel.C0, predicted=None, day=DAY):
    return TradeOpportunity(
        sample_id=sid,
        date=day,
        p_open=p_open,
        p_close=p_close,
        true_label=true_label,
        predicted=predicted,
    )


def seq_config(v0=1000.0, beta=1000.0, policy=Policy(kind="all")):
    return BacktestConfig(
        initial_wealth=v0, policy=policy, per_position_cap=beta, mode="sequential"
    )


def daily_config(v0=100.0, beta=math.inf, policy=Policy(kind="all")):
    return BacktestConfig(
        initial_wealth=v0, policy=policy, per_position_cap=beta, mode="daily_batch"
    )


class TestPositionSize:
    def test_cap_binds(self):
        assert position_size(50_000.0, 10, 1000.0) == 1000.0

    def test_split_binds(self):
        assert position_size(5_000.0, 10, 1000.0) == 500.0

    def test_exhausted_wealth_gives_zero(self):
        assert position_size(-1.0, 5, 1000.0) == 0.0

    def test_needs_at_least_one_trade(self):
        with pytest.raises(InputError):
            position_size(100.0, 0, 10.0)


class TestSequential:
    def test_single_trade_hand_trace(self):
        report = run_sequential([opp("a", 100.0, 102.0)], seq_config())
        assert round(report.final_wealth, 2) == 1020.00
        assert report.trade_count == 1

    def test_two_trade_hand_trace(self):
        opps = [opp("a", 100.0, 102.0), opp("b", 100.0, 97.0)]
        report = run_sequential(opps, seq_config())
        assert round(report.ledger[0].wealth_after, 2) == 1020.00
        assert round(report.final_wealth, 2) == 990.00
        assert report.trade_count == 2

    def test_cap_limits_investment(self):
        opps = [opp("a", 100.0, 110.0)]
        report = run_sequential(opps, seq_config(v0=5000.0, beta=1000.0))
        assert report.final_wealth == pytest.approx(5100.0)

    def test_low_wealth_invests_all_of_it(self):
        opps = [opp("a", 100.0, 110.0)]
        report = run_sequential(opps, seq_config(v0=500.0, beta=1000.0))
        assert report.final_wealth == pytest.approx(550.0)

    def test_unselected_opportunities_expire(self):
        policy = Policy(kind="predicted_c1")
        opps = [
            opp("a", 100.0, 110.0, predicted=ClassLabel.C0),
            opp("b", 100.0, 105.0, predicted=ClassLabel.C1),
        ]
        report = run_sequential(opps, seq_config(policy=policy))
        assert report.trade_count == 1
        assert report.ledger[0].sample_id == "b"

    def test_mode_mismatch_rejected(self):
        with pytest.raises(InputError):
            run_sequential([], daily_config())

    @given(
        st.lists(
            st.floats(min_value=0.0, max_value=0.2),
            min_size=1,
            max_size=25,
        )
    )
    def test_non_negative_yields_never_lose(self, gains):
        opps = [
            opp(str(i), 100.0, 100.0 * (1.0 + g), day=DAY + timedelta(days=i))
            for i, g in enumerate(gains)
        ]
        report = run_sequential(opps, seq_config())
        wealth_path = [f.wealth_after for f in report.ledger]
        assert all(b >= a - 1e-12 for a, b in zip([1000.0] + wealth_path, wealth_path))

    def test_additive_regime_shuffle_invariance(self):
        # dyadic prices and returns: cap always binds and every product is
        # exactly representable, so reordering must not move a single bit
        returns = [(64.0, 68.0), (64.0, 62.0), (64.0, 66.0), (64.0, 63.0)]
        opps = [opp(str(i), po, pc) for i, (po, pc) in enumerate(returns)]
        cfg = seq_config(v0=2048.0, beta=1024.0)
        baseline = run_sequential(opps, cfg).final_wealth
        rng = np.random.default_rng(9)
        for _ in range(50):
            shuffled = [opps[i] for i in rng.permutation(len(opps))]
            assert run_sequential(shuffled, cfg).final_wealth == baseline


class TestDailyBatch:
    def test_symmetric_day_is_wealth_neutral(self):
        opps = [opp("a", 100.0, 110.0), opp("b", 100.0, 90.0)]
        report = run_daily_batch(opps, daily_config(v0=100.0))
        assert report.final_wealth == pytest.approx(100.0, abs=1e-9)
        assert report.ledger[0].size == pytest.approx(50.0)

    def test_day_without_selections_leaves_wealth(self):
        policy = Policy(kind="predicted_c1")
        opps = [opp("a", 100.0, 150.0, predicted=ClassLabel.C0)]
        report = run_daily_batch(opps, daily_config(policy=policy))
        assert report.final_wealth == 100.0
        assert report.trade_count == 0
        assert report.mean_yield_per_trade is None

    def test_within_day_permutation_invariance(self):
        rng = np.random.default_rng(13)
        opps = [
            opp(f"s{i}", 100.0, float(100.0 * rng.uniform(0.9, 1.1)))
            for i in range(40)
        ]
        cfg = daily_config(v0=50_000.0)
        baseline = run_daily_batch(opps, cfg).final_wealth
        for _ in range(200):
            shuffled = [opps[i] for i in rng.permutation(len(opps))]
            assert run_daily_batch(shuffled, cfg).final_wealth == baseline

    def test_multi_day_sizing_uses_day_open_wealth(self):
        day2 = DAY + timedelta(days=1)
        opps = [
            opp("a", 100.0, 120.0, day=DAY),
            opp("b", 100.0, 110.0, day=day2),
            opp("c", 100.0, 110.0, day=day2),
        ]
        report = run_daily_batch(opps, daily_config(v0=100.0))
        # day1: 100 -> 120; day2: each of 2 trades sized 60, +10% each
        assert report.final_wealth == pytest.approx(132.0)
        assert dict(report.wealth_by_day) == {
            DAY: pytest.approx(120.0),
            day2: pytest.approx(132.0),
        }

    def test_equivalent_to_sequential_settlement_oracle(self):
        # with beta unbounded: v' = v * (1 + mean(returns)); check against a
        # hand-rolled settlement that opens all positions then sums
        rng = np.random.default_rng(21)
        opps = [
            opp(f"s{i}", 50.0, float(50.0 * rng.uniform(0.95, 1.05)))
            for i in range(11)
        ]
        report = run_daily_batch(opps, daily_config(v0=1234.0))
        s = 1234.0 / 11
        expected = 1234.0 + s * math.fsum(o.net_return for o in opps)
        assert report.final_wealth == pytest.approx(expected, abs=1e-9)


class TestPolicies:
    def test_zero_probability_trades_nothing(self):
        opps = [opp(str(i), 100.0, 101.0) for i in range(50)]
        report = run_sequential(opps, seq_config(policy=random_policy(0.0, seed=1)))
        assert report.trade_count == 0

    def test_unit_probability_equals_all(self):
        opps = [opp(str(i), 100.0, 101.0) for i in range(50)]
        all_report = run_sequential(opps, seq_config())
        rnd_report = run_sequential(opps, seq_config(policy=random_policy(1.0, seed=1)))
        assert rnd_report.trade_count == all_report.trade_count == 50
        assert rnd_report.final_wealth == all_report.final_wealth

    def test_selection_count_within_binomial_bounds(self):
        n, p = 3179, 0.33
        opps = [opp(str(i), 100.0, 100.0) for i in range(n)]
        report = run_sequential(opps, seq_config(policy=random_policy(p, seed=5)))
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(report.trade_count - n * p) <= 3 * sigma

    def test_random_selection_is_order_independent(self):
        policy = random_policy(0.5, seed=11)
        opps = [opp(str(i), 100.0, 101.0) for i in range(100)]
        forward = {f.sample_id for f in run_sequential(opps, seq_config(policy=policy)).ledger}
        backward = {
            f.sample_id
            for f in run_sequential(opps[::-1], seq_config(policy=policy)).ledger
        }
        assert forward == backward

    def test_true_c1_selects_exactly_the_buys(self):
        opps = [
            opp("a", 100.0, 103.3, true_label=ClassLabel.C1),
            opp("b", 100.0, 100.0, true_label=ClassLabel.C0),
            opp("c", 100.0, 96.9, true_label=ClassLabel.C2),
            opp("d", 100.0, 103.3, true_label=ClassLabel.C1),
        ]
        policy = Policy(kind="true_c1")
        report = run_sequential(opps, seq_config(policy=policy))
        assert {f.sample_id for f in report.ledger} == {"a", "d"}
        assert report.mean_yield_per_trade == pytest.approx(0.033, abs=1e-12)

    def test_true_c1_weakly_dominates_on_class_mean_fixture(self):
        # class-mean yields from the published test subset
        opps = (
            [opp(f"c1_{i}", 100.0, 103.3, true_label=ClassLabel.C1) for i in range(5)]
            + [opp(f"c0_{i}", 100.0, 100.0, true_label=ClassLabel.C0) for i in range(5)]
            + [opp(f"c2_{i}", 100.0, 96.9, true_label=ClassLabel.C2) for i in range(5)]
        )
        means = {}
        for name, policy in (
            ("true_c1", Policy(kind="true_c1")),
            ("all", Policy(kind="all")),
            ("random", random_policy(0.5, seed=3)),
        ):
            report = run_sequential(opps, seq_config(policy=policy))
            if report.mean_yield_per_trade is not None:
                means[name] = report.mean_yield_per_trade
        assert all(means["true_c1"] >= m - 1e-12 for m in means.values())

    def test_parse_policy(self):
        assert parse_policy("all").kind == "all"
        assert parse_policy("random:0.33", seed=1).probability == 0.33
        with pytest.raises(InputError):
            parse_policy("random:0.33")
        with pytest.raises(InputError):
            parse_policy("bogus")


class TestOpportunityIo:
    def test_round_trip(self, tmp_path):
        samples = [
            make_sample("A", DAY, 100.0, 103.0),
            make_sample("B", DAY, 100.0, 99.0),
        ]
        opps = build_opportunities(samples)
        assert opps[0].true_label is ClassLabel.C1
        path = tmp_path / "opps.csv"
        write_opportunities_csv(opps, path)
        assert load_opportunities_csv(path) == opps

    def test_bad_prices_rejected(self):
        with pytest.raises(InputError):
            opp("a", 0.0, 100.0)
