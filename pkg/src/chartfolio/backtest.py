"""The two trading pipelines: one-at-a-time and daily-batch settlement.

Positions are fractional and wealth stays in binary doubles end to end;
rounding to cents happens only at display. Once wealth is exhausted every
subsequent position size is zero, so the wealth path can never go negative.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Iterable, Sequence

from .classifier import PredictionRecord
from .dataset import ClassLabel, LabeledSample
from .errors import InputError
from .rng import stream

OPPS_HEADER = ("sample_id", "date", "p0", "pT", "true_label", "predicted")


@dataclass(frozen=True)
class TradeOpportunity:
    sample_id: str
    date: date
    p_open: float
    p_close: float
    true_label: ClassLabel
    predicted: ClassLabel | None = None

    def __post_init__(self) -> None:
        if self.p_open <= 0 or self.p_close <= 0:
            raise InputError(f"{self.sample_id}: prices must be positive")

    @property
    def net_return(self) -> float:
        return self.p_close / self.p_open - 1.0


@dataclass(frozen=True)
class Policy:
    """Trade-selection rule: all, predicted_c1, true_c1 or random(p)."""

    kind: str
    probability: float | None = None
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("all", "predicted_c1", "true_c1", "random"):
            raise InputError(f"unknown policy {self.kind!r}")
        if self.kind == "random":
            if self.probability is None or not 0.0 <= self.probability <= 1.0:
                raise InputError("random policy needs a probability in [0,1]")
            if self.seed is None:
                raise InputError("random policy needs a seed")

    def selects(self, opp: TradeOpportunity) -> bool:
        if self.kind == "all":
            return True
        if self.kind == "predicted_c1":
            return opp.predicted is ClassLabel.C1
        if self.kind == "true_c1":
            return opp.true_label is ClassLabel.C1
        # random: keyed by sample_id so the decision is order-independent
        return stream(self.seed, "policy", opp.sample_id).random() < self.probability


def random_policy(p: float, seed: int) -> Policy:
    return Policy(kind="random", probability=p, seed=seed)


def parse_policy(text: str, seed: int | None = None) -> Policy:
    """Parse CLI policy syntax: all | predicted_c1 | true_c1 | random:P."""
    if text.startswith("random:"):
        try:
            p = float(text.split(":", 1)[1])
        except ValueError as exc:
            raise InputError(f"bad random policy {text!r}") from exc
        if seed is None:
            raise InputError("random policy requires --seed")
        return random_policy(p, seed)
    return Policy(kind=text)


@dataclass(frozen=True)
class BacktestConfig:
    initial_wealth: float
    policy: Policy
    per_position_cap: float = float("inf")
    mode: str = "sequential"

    def __post_init__(self) -> None:
        if self.initial_wealth <= 0:
            raise InputError("initial wealth must be positive")
        if self.per_position_cap <= 0:
            raise InputError("per-position cap must be positive (or unbounded)")
        if self.mode not in ("sequential", "daily_batch"):
            raise InputError(f"unknown mode {self.mode!r}")


def position_size(v: float, n_trades: int, beta: float) -> float:
    """Equal-split size min(beta, v/n_trades), never negative."""
    if n_trades < 1:
        raise InputError("n_trades must be at least 1")
    return max(0.0, min(beta, v / n_trades))


@dataclass(frozen=True)
class TradeFill:
    sample_id: str
    date: date
    size: float
    net_return: float
    wealth_after: float


@dataclass(frozen=True)
class BacktestReport:
    initial_wealth: float
    final_wealth: float
    trade_count: int
    mean_yield_per_trade: float | None
    profit_per_trade: float | None
    wealth_by_day: tuple[tuple[date, float], ...]
    ledger: tuple[TradeFill, ...]


def _finish(
    v0: float,
    v: float,
    ledger: list[TradeFill],
    by_day: dict[date, float],
) -> BacktestReport:
    count = len(ledger)
    return BacktestReport(
        initial_wealth=v0,
        final_wealth=v,
        trade_count=count,
        mean_yield_per_trade=(
            math.fsum(f.net_return for f in ledger) / count if count else None
        ),
        profit_per_trade=((v - v0) / count if count else None),
        wealth_by_day=tuple(by_day.items()),
        ledger=tuple(ledger),
    )


def run_sequential(
    opps: Sequence[TradeOpportunity], cfg: BacktestConfig
) -> BacktestReport:
    """One opportunity at a time, in the given order.

    Each selected trade invests max(0, min(v, beta)) and settles before the
    next arrives; unselected opportunities expire worthless.
    """
    if cfg.mode != "sequential":
        raise InputError(f"config mode is {cfg.mode!r}, not sequential")
    v = cfg.initial_wealth
    ledger: list[TradeFill] = []
    by_day: dict[date, float] = {}
    for opp in opps:
        if cfg.policy.selects(opp):
            size = max(0.0, min(v, cfg.per_position_cap))
            v += size * opp.net_return
            ledger.append(
                TradeFill(
                    sample_id=opp.sample_id,
                    date=opp.date,
                    size=size,
                    net_return=opp.net_return,
                    wealth_after=v,
                )
            )
        by_day[opp.date] = v
    return _finish(cfg.initial_wealth, v, ledger, by_day)


def run_daily_batch(
    opps: Sequence[TradeOpportunity], cfg: BacktestConfig
) -> BacktestReport:
    """All selected trades of a day open at equal size and settle at once.

    The size is min(beta, v/(number of selected trades)) from the wealth at
    the day's open, so within-day ordering cannot affect the outcome.
    """
    if cfg.mode != "daily_batch":
        raise InputError(f"config mode is {cfg.mode!r}, not daily_batch")
    days: dict[date, list[TradeOpportunity]] = {}
    for opp in opps:
        days.setdefault(opp.date, []).append(opp)

    v = cfg.initial_wealth
    ledger: list[TradeFill] = []
    by_day: dict[date, float] = {}
    for day in sorted(days):
        selected = [opp for opp in days[day] if cfg.policy.selects(opp)]
        if selected:
            size = position_size(v, len(selected), cfg.per_position_cap)
            # fsum: settlement must not depend on within-day arrival order
            v += size * math.fsum(opp.net_return for opp in selected)
            for opp in selected:
                ledger.append(
                    TradeFill(
                        sample_id=opp.sample_id,
                        date=day,
                        size=size,
                        net_return=opp.net_return,
                        wealth_after=v,
                    )
                )
        by_day[day] = v
    return _finish(cfg.initial_wealth, v, ledger, by_day)


def run_backtest(opps: Sequence[TradeOpportunity], cfg: BacktestConfig) -> BacktestReport:
    if cfg.mode == "sequential":
        return run_sequential(opps, cfg)
    return run_daily_batch(opps, cfg)


def build_opportunities(
    samples: Sequence[LabeledSample],
    records: Sequence[PredictionRecord] | None = None,
) -> list[TradeOpportunity]:
    """Turn samples (optionally joined with predictions) into opportunities."""
    predicted_by_id: dict[str, ClassLabel | None] = {}
    if records is not None:
        for r in records:
            predicted_by_id[r.sample_id] = r.predicted
    out = []
    for s in samples:
        out.append(
            TradeOpportunity(
                sample_id=s.sample_id,
                date=s.date,
                p_open=s.p0,
                p_close=s.pT,
                true_label=s.label,
                predicted=predicted_by_id.get(s.sample_id),
            )
        )
    return out


def write_opportunities_csv(opps: Iterable[TradeOpportunity], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(OPPS_HEADER)
        for opp in opps:
            writer.writerow(
                (
                    opp.sample_id,
                    opp.date.isoformat(),
                    repr(opp.p_open),
                    repr(opp.p_close),
                    int(opp.true_label),
                    "" if opp.predicted is None else int(opp.predicted),
                )
            )


def load_opportunities_csv(path: str | Path) -> list[TradeOpportunity]:
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    out: list[TradeOpportunity] = []
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise InputError(f"{path}: missing CSV header")
        missing = [c for c in OPPS_HEADER if c not in reader.fieldnames]
        if missing:
            raise InputError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(
                    TradeOpportunity(
                        sample_id=row["sample_id"],
                        date=date.fromisoformat(row["date"]),
                        p_open=float(row["p0"]),
                        p_close=float(row["pT"]),
                        true_label=ClassLabel(int(row["true_label"])),
                        predicted=(
                            ClassLabel(int(row["predicted"]))
                            if row["predicted"] not in (None, "")
                            else None
                        ),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: bad opportunity row: {exc}") from exc
    return out
