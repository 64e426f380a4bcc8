"""Acceptance suite: one test per exit criterion, one PASS line each.

Run with `pytest tests/test_acceptance.py -s` to see the pass lines and
timings as they happen. Every tolerance is pinned here, not configurable.
"""

import math
import time
from datetime import date, timedelta

import numpy as np
import pytest
from scipy import stats as sps

from chartfolio.analytics import (
    ConfusionMatrix,
    alpha_sweep,
    confusion,
    expected_yield,
    metrics,
    mnl_fit,
    mnl_predict_probs,
    ols_fit,
    predicted_pool_weights,
)
from chartfolio.backtest import (
    BacktestConfig,
    Policy,
    TradeOpportunity,
    run_daily_batch,
    run_sequential,
)
from chartfolio.chartgen import RenderSpec, png_bytes, render_candles
from chartfolio.classifier import alpha_filter
from chartfolio.dataset import ClassLabel
from chartfolio.montecarlo import (
    BreakEvenInputs,
    McClass,
    McExperiment,
    TruncNormalSpec,
    break_even_ratio,
    run_experiment,
    sample_truncnorm,
    truncnorm_cdf,
    truncnorm_mean,
)
from chartfolio.rng import stream

from conftest import TABLE2_COUNTS, make_bars
from test_analytics import mnl_grid_best_ll, ols_oracle
from test_chartgen import random_bar_specs

CLASS_SPECS = (
    TruncNormalSpec(mu=0.03, sigma=0.015, a=0.02, b=0.15),
    TruncNormalSpec(mu=0.0, sigma=0.01, a=-0.02, b=0.02),
    TruncNormalSpec(mu=-0.03, sigma=0.015, a=-0.15, b=-0.02),
)
BUY_RATES = (0.572, 0.315, 0.187)


def _pass(name: str, t0: float) -> None:
    print(f"ACCEPTANCE PASS: {name} ({time.perf_counter() - t0:.2f}s)")


def _experiment(counts, reps=10_000, seed=42):
    return McExperiment(
        classes=tuple(
            McClass(spec=spec, count=count, buy_prob=rate)
            for spec, count, rate in zip(CLASS_SPECS, counts, BUY_RATES)
        ),
        initial_wealth=1000.0,
        per_trade_cap=1000.0,
        repetitions=reps,
        seed=seed,
    )


def test_table2_arithmetic():
    t0 = time.perf_counter()
    m = metrics(ConfusionMatrix(TABLE2_COUNTS))
    assert abs(m.accuracy - 0.5146) <= 0.0001
    assert tuple(round(p, 2) for p in m.precision) == (0.79, 0.29, 0.20)
    assert tuple(round(r, 2) for r in m.recall) == (0.52, 0.57, 0.37)
    assert time.perf_counter() - t0 < 1.0
    _pass("Table II arithmetic: accuracy 0.5146, precision/recall to 2 d.p.", t0)


def test_expected_yield_accounting():
    t0 = time.perf_counter()
    weights = predicted_pool_weights(ConfusionMatrix(TABLE2_COUNTS))
    assert tuple(round(w, 3) for w in weights) == (0.657, 0.292, 0.051)
    value = expected_yield(weights, (0.000, 0.033, -0.031))
    assert abs(value - 0.008) <= 0.0005
    assert time.perf_counter() - t0 < 1.0
    _pass("expected yield 0.008 +/- 0.0005 from Table II column weights", t0)


@pytest.mark.parametrize(
    "name,counts,window",
    [
        ("Exp1", (33, 10, 100), (988.0, 1018.0)),
        ("Exp2", (100, 10, 100), (2280.0, 2520.0)),
        ("Exp3", (50, 10, 300), (325.0, 400.0)),
    ],
)
def test_monte_carlo_experiment(name, counts, window):
    t0 = time.perf_counter()
    # validate the sampler against the closed-form truncated-normal mean
    # before trusting the simulation
    assert abs(truncnorm_mean(CLASS_SPECS[0]) - 0.0364) <= 1e-4
    assert abs(truncnorm_mean(CLASS_SPECS[1])) <= 1e-12
    expected_gain = 1000.0 * sum(
        c * r * truncnorm_mean(s) for c, r, s in zip(counts, BUY_RATES, CLASS_SPECS)
    )
    if name == "Exp1":
        assert 5.0 < expected_gain < 8.0  # the pre-cap break-even margin

    result = run_experiment(_experiment(counts))
    lo, hi = window
    assert lo <= result.mean <= hi, f"{name} mean {result.mean:.2f} outside [{lo},{hi}]"
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    _pass(f"Monte Carlo {name}: mean wealth {result.mean:.1f} in [{lo:g},{hi:g}]", t0)


def test_break_even_boundary_and_crossing():
    t0 = time.perf_counter()
    inp = BreakEvenInputs(
        gamma1=0.03, gamma2=0.0, gamma3=-0.03,
        pi1=BUY_RATES[0], pi2=BUY_RATES[1], pi3=BUY_RATES[2],
        n2=10, n3=100,
    )
    result = break_even_ratio(inp)
    assert abs(result.ratio_n1_n3 - 0.327) <= 0.001

    means = {}
    for n1 in range(20, 46):
        means[n1] = run_experiment(_experiment((n1, 10, 100), reps=4000)).mean
    ordered = sorted(means)
    crossing = next(n1 for n1 in ordered if means[n1] >= 1000.0)
    assert means[ordered[0]] < 1000.0 < means[ordered[-1]]
    assert abs(crossing - 33) <= 3, f"zero-profit crossing at n1={crossing}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 120.0
    _pass(f"break-even ratio 0.327 and MC crossing at n1={crossing} (33 +/- 3)", t0)


def test_alpha_filter_arithmetic(table8_records):
    t0 = time.perf_counter()
    classified, _ = alpha_filter(table8_records, 0.95)
    assert len(classified) == 71
    m = metrics(confusion(classified))
    assert abs(m.accuracy - 63 / 71) <= 0.001
    assert abs(len(classified) / len(table8_records) - 0.0223) <= 0.0005

    grid = [round(0.34 + 0.005 * k, 10) for k in range(int((0.95 - 0.34) / 0.005) + 1)]
    curve = alpha_sweep(table8_records, grid)
    counts = [p.classified_count for p in curve.points]
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    _pass("alpha=0.95 filter: 71 classified, accuracy 0.887, monotone volume", t0)


def test_regression_engines():
    t0 = time.perf_counter()

    # OLS vs the brute-force normal-equations oracle, 100 seeded datasets
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(10, 400))
        x = rng.uniform(-3, 3, size=n)
        y = rng.uniform(-1, 1) + rng.uniform(-2, 2) * x + rng.normal(0, 0.5, size=n)
        points = list(zip(x, y))
        fit = ols_fit(points)
        b0, b1 = ols_oracle(points)
        assert abs(fit.beta0 - b0) <= 1e-10
        assert abs(fit.beta1 - b1) <= 1e-10

    # multinomial logit vs a 41^4 grid-search oracle on 20 small datasets
    done = 0
    seed = 0
    while done < 20:
        seed += 1
        rng = np.random.default_rng(seed)
        x = rng.uniform(0.95, 1.05, size=16)
        points = []
        for xi in x:
            probs = mnl_predict_probs(((-2.0, 2.0), (2.5, -2.5)), float(xi))
            points.append((float(xi), ClassLabel(rng.choice(3, p=probs))))
        if len({p[1] for p in points}) < 3:
            continue
        fit = mnl_fit(points)
        if not fit.converged:
            continue
        xa = np.array([p[0] for p in points])
        ya = np.array([int(p[1]) for p in points])
        center = (fit.intercepts[0], fit.slopes[0], fit.intercepts[1], fit.slopes[1])
        assert fit.log_likelihood >= mnl_grid_best_ll(xa, ya, center) - 1e-6
        assert fit.gradient_norm < 1e-6
        done += 1

    probs = mnl_predict_probs(((-22.8763, 22.4499), (14.9750, -16.0069)), 1.003)
    assert abs(probs[0] - 0.491) <= 0.001
    assert abs(probs[1] - 0.343) <= 0.001
    assert abs(probs[2] - 0.167) <= 0.001

    elapsed = time.perf_counter() - t0
    assert elapsed < 60.0
    _pass("regressions: OLS oracle 1e-10 x100, MNL grid oracle x20, Table VI probs", t0)


def test_backtest_engine():
    t0 = time.perf_counter()
    day = date(2022, 1, 3)

    def opp(sid, p_open, p_close, label=ClassLabel.C0, d=day):
        return TradeOpportunity(
            sample_id=sid, date=d, p_open=p_open, p_close=p_close, true_label=label
        )

    seq_cfg = BacktestConfig(
        initial_wealth=1000.0, policy=Policy(kind="all"),
        per_position_cap=1000.0, mode="sequential",
    )
    report = run_sequential([opp("a", 100.0, 102.0), opp("b", 100.0, 97.0)], seq_cfg)
    assert round(report.ledger[0].wealth_after, 2) == 1020.00
    assert round(report.final_wealth, 2) == 990.00

    rng = np.random.default_rng(99)
    opps = [
        opp(f"s{i}", 100.0, float(100.0 * rng.uniform(0.9, 1.1))) for i in range(30)
    ]
    batch_cfg = BacktestConfig(
        initial_wealth=50_000.0, policy=Policy(kind="all"),
        per_position_cap=math.inf, mode="daily_batch",
    )
    baseline = run_daily_batch(opps, batch_cfg).final_wealth
    for _ in range(1000):
        shuffled = [opps[i] for i in rng.permutation(len(opps))]
        assert run_daily_batch(shuffled, batch_cfg).final_wealth == baseline

    fixture = (
        [opp(f"c1_{i}", 100.0, 103.3, ClassLabel.C1, day + timedelta(days=i)) for i in range(7)]
        + [opp(f"c0_{i}", 100.0, 100.1, ClassLabel.C0, day + timedelta(days=i)) for i in range(7)]
        + [opp(f"c2_{i}", 100.0, 96.9, ClassLabel.C2, day + timedelta(days=i)) for i in range(7)]
    )
    c1_mean = math.fsum(o.net_return for o in fixture if o.true_label is ClassLabel.C1) / 7
    true_c1_cfg = BacktestConfig(
        initial_wealth=1000.0, policy=Policy(kind="true_c1"),
        per_position_cap=1000.0, mode="sequential",
    )
    report = run_sequential(fixture, true_c1_cfg)
    assert report.trade_count == 7
    assert abs(report.mean_yield_per_trade - c1_mean) <= 1e-12
    _pass("backtests: cent-exact traces, 1000 exact permutations, true_c1 mean", t0)


def test_renderer_determinism_and_sampler_ks():
    t0 = time.perf_counter()
    spec = RenderSpec()
    rng = np.random.default_rng(2023)
    for i in range(500):
        bar_specs = random_bar_specs(rng)
        bars = make_bars(bar_specs)
        first = render_candles(bars, spec)
        second = render_candles(bars, spec)
        assert png_bytes(first) == png_bytes(second)
        if i % 25 == 0:
            scaled = make_bars(
                [(o * 4.0, h * 4.0, lo * 4.0, c * 4.0, v * 32) for o, h, lo, c, v in bar_specs]
            )
            assert np.array_equal(first.pixels, render_candles(scaled, spec).pixels)

    draws = sample_truncnorm(CLASS_SPECS[0], stream(7, "accept-ks"), size=100_000)
    ks = sps.kstest(draws, lambda x: truncnorm_cdf(CLASS_SPECS[0], x))
    assert ks.pvalue > 0.001
    _pass("renderer: 500 sessions byte-identical twice, scale covariance, KS", t0)
