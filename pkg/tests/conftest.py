"""Shared fixtures: session builders and the published-table constants."""

from __future__ import annotations

from datetime import date

import numpy as np
import pytest

from chartfolio.classifier import PredictionRecord
from chartfolio.dataset import ClassLabel
from chartfolio.marketdata import OhlcvBar, TradingSession, session_grid

# Published confusion counts (rows: true C0/C1/C2, columns: predicted).
TABLE2_COUNTS = np.array(
    [
        [1200, 728, 386],
        [185, 324, 57],
        [131, 56, 112],
    ]
)

# Confusion of the 71 records that clear the 0.95 approval threshold.
TABLE8_COUNTS = np.array(
    [
        [46, 1, 5],
        [2, 14, 0],
        [0, 0, 3],
    ]
)

TEST_SET_SIZE = 3179


def build_session(
    ticker: str = "AAPL",
    day: date = date(2022, 3, 1),
    closes=None,
    volume: int = 1000,
    n_bars: int = 78,
) -> TradingSession:
    """A valid session whose bars carry the given close prices."""
    if closes is None:
        closes = [100.0 + 0.1 * i for i in range(n_bars)]
    assert len(closes) == n_bars
    grid = session_grid(day)[:n_bars]
    bars = []
    for ts, close in zip(grid, closes):
        bars.append(
            OhlcvBar(
                timestamp=ts,
                open=close,
                high=close,
                low=close,
                close=close,
                volume=volume,
            )
        )
    return TradingSession(ticker=ticker, date=day, bars=tuple(bars))


def make_bars(specs, day: date = date(2022, 3, 1)):
    """12 chart bars from (open, high, low, close, volume) tuples."""
    assert len(specs) == 12
    grid = session_grid(day)[:12]
    return tuple(
        OhlcvBar(timestamp=ts, open=o, high=h, low=lo, close=c, volume=v)
        for ts, (o, h, lo, c, v) in zip(grid, specs)
    )


def softmax_peaked(j: int, confidence: float) -> tuple[float, float, float]:
    """A softmax vector with `confidence` on class j, rest split evenly."""
    rest = (1.0 - confidence) / 2.0
    out = [rest, rest, rest]
    out[j] = confidence
    return (out[0], out[1], out[2])


@pytest.fixture(scope="session")
def table8_records() -> list[PredictionRecord]:
    """3179 records realizing the 0.95-approval confusion pattern.

    Exactly 71 records carry max softmax 0.96 arranged per TABLE8_COUNTS;
    the rest sit at max 0.5 so any alpha in (0.5, 0.96] classifies only
    the 71. Row totals per true class match the published test set
    (2314/566/299).
    """
    records = []
    for i in range(3):
        for j in range(3):
            for k in range(int(TABLE8_COUNTS[i, j])):
                records.append(
                    PredictionRecord(
                        sample_id=f"hi:{i}:{j}:{k}",
                        true_label=ClassLabel(i),
                        softmax=softmax_peaked(j, 0.96),
                    )
                )
    row_totals = (2314, 566, 299)
    for i in range(3):
        remaining = row_totals[i] - int(TABLE8_COUNTS[i].sum())
        for k in range(remaining):
            records.append(
                PredictionRecord(
                    sample_id=f"lo:{i}:{k}",
                    true_label=ClassLabel(i),
                    softmax=softmax_peaked(k % 3, 0.5),
                )
            )
    assert len(records) == TEST_SET_SIZE
    return records
