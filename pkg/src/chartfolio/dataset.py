"""Labeling by the +/-2% rule, splits, class balancing and summary stats."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from datetime import date
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError
from .marketdata import TradingSession, extract_reference_prices, incomplete_reason
from .rng import stream

BUY_THRESHOLD = 1.02
SELL_THRESHOLD = 0.98

SAMPLES_HEADER = ("sample_id", "ticker", "date", "p0", "pT", "yield", "label", "image_path")


class ClassLabel(IntEnum):
    C0 = 0  # no-call: |net yield| < 2%
    C1 = 1  # buy: net yield >= +2%
    C2 = 2  # sell: net yield <= -2%


def label_sample(p0: float, pT: float) -> ClassLabel:
    """Classify a ticker-day by its yield pT/p0; both boundaries inclusive."""
    if p0 <= 0 or pT <= 0:
        raise InputError("prices must be strictly positive")
    ratio = pT / p0
    if ratio >= BUY_THRESHOLD:
        return ClassLabel.C1
    if ratio <= SELL_THRESHOLD:
        return ClassLabel.C2
    return ClassLabel.C0


@dataclass(frozen=True)
class LabeledSample:
    sample_id: str
    ticker: str
    date: date
    p0: float
    pT: float
    yield_ratio: float
    label: ClassLabel
    image_path: str | None = None


def sample_id_for(ticker: str, day: date) -> str:
    return f"{ticker}:{day.isoformat()}"


def make_sample(
    ticker: str, day: date, p0: float, pT: float, image_path: str | None = None
) -> LabeledSample:
    return LabeledSample(
        sample_id=sample_id_for(ticker, day),
        ticker=ticker,
        date=day,
        p0=p0,
        pT=pT,
        yield_ratio=pT / p0,
        label=label_sample(p0, pT),
        image_path=image_path,
    )


def label_sessions(
    sessions: Iterable[TradingSession],
) -> tuple[list[LabeledSample], list[tuple[TradingSession, str]]]:
    """Label every complete session; incomplete ones are returned as skips."""
    samples: list[LabeledSample] = []
    skipped: list[tuple[TradingSession, str]] = []
    for session in sessions:
        reason = incomplete_reason(session)
        if reason is not None:
            skipped.append((session, reason))
            continue
        p0, pT = extract_reference_prices(session)
        samples.append(make_sample(session.ticker, session.date, p0, pT))
    return samples, skipped


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[LabeledSample, ...]
    validation: tuple[LabeledSample, ...]
    test: tuple[LabeledSample, ...]

    def __post_init__(self) -> None:
        ids = [s.sample_id for part in (self.train, self.validation, self.test) for s in part]
        if len(ids) != len(set(ids)):
            raise InputError("split subsets are not disjoint by sample_id")


def split_dataset(
    samples: Sequence[LabeledSample],
    fractions: tuple[float, float, float],
    seed: int,
    method: str = "random",
) -> DatasetSplit:
    """Partition into train/validation/test with sizes within 1 of fraction*N.

    `random` shuffles with a stream derived from the seed; `chronological`
    orders by (date, sample_id) and cuts in sequence. Both are deterministic
    for a given seed and input set.
    """
    if not samples:
        raise InputError("cannot split an empty sample set")
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise InputError("fractions must be 3 non-negative numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise InputError(f"fractions must sum to 1, got {sum(fractions)}")

    ordered = sorted(samples, key=lambda s: s.sample_id)
    if method == "random":
        perm = stream(seed, "split").permutation(len(ordered))
        ordered = [ordered[i] for i in perm]
    elif method == "chronological":
        ordered = sorted(ordered, key=lambda s: (s.date, s.sample_id))
    else:
        raise InputError(f"unknown split method {method!r}")

    n = len(ordered)
    cut1 = round(fractions[0] * n)
    cut2 = round((fractions[0] + fractions[1]) * n)
    return DatasetSplit(
        train=tuple(ordered[:cut1]),
        validation=tuple(ordered[cut1:cut2]),
        test=tuple(ordered[cut2:]),
    )


def balance_downsample(
    samples: Sequence[LabeledSample],
    targets: dict[ClassLabel, int],
    seed: int,
) -> list[LabeledSample]:
    """Remove random units per class down to the target counts.

    Removal is uniform without replacement from a per-class stream; samples
    that survive are returned unchanged, in their input order.
    """
    by_class: dict[ClassLabel, list[LabeledSample]] = {c: [] for c in ClassLabel}
    for s in samples:
        by_class[s.label].append(s)

    keep_ids: set[str] = set()
    for label in ClassLabel:
        pool = sorted(by_class[label], key=lambda s: s.sample_id)
        target = targets.get(label, len(pool))
        if target > len(pool):
            raise InputError(
                f"target {target} for {label.name} exceeds available {len(pool)}"
            )
        rng = stream(seed, "downsample", int(label))
        chosen = rng.choice(len(pool), size=target, replace=False)
        keep_ids.update(pool[i].sample_id for i in chosen)

    return [s for s in samples if s.sample_id in keep_ids]


@dataclass(frozen=True)
class YieldStats:
    count: int
    mean: float
    median: float
    stdev: float
    min: float
    max: float
    q1: float
    q3: float


def yield_stats(values: Sequence[float]) -> YieldStats:
    """Population-moment stats; quartiles by linear rank interpolation."""
    if len(values) == 0:
        raise InputError("no values to summarize")
    arr = np.asarray(values, dtype=np.float64)
    return YieldStats(
        count=int(arr.size),
        mean=float(arr.mean()),
        median=float(np.quantile(arr, 0.5)),
        stdev=float(arr.std(ddof=0)),
        min=float(arr.min()),
        max=float(arr.max()),
        q1=float(np.quantile(arr, 0.25)),
        q3=float(np.quantile(arr, 0.75)),
    )


@dataclass(frozen=True)
class SummaryStats:
    overall: YieldStats
    per_class: dict[ClassLabel, YieldStats]


def summarize(samples: Sequence[LabeledSample]) -> SummaryStats:
    """Yield statistics overall and per class (absent classes are omitted)."""
    if not samples:
        raise InputError("cannot summarize an empty sample set")
    per_class = {}
    for label in ClassLabel:
        values = [s.yield_ratio for s in samples if s.label is label]
        if values:
            per_class[label] = yield_stats(values)
    return SummaryStats(
        overall=yield_stats([s.yield_ratio for s in samples]),
        per_class=per_class,
    )


def write_samples_csv(samples: Iterable[LabeledSample], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SAMPLES_HEADER)
        for s in samples:
            writer.writerow(
                (
                    s.sample_id,
                    s.ticker,
                    s.date.isoformat(),
                    repr(s.p0),
                    repr(s.pT),
                    repr(s.yield_ratio),
                    int(s.label),
                    s.image_path or "",
                )
            )


def load_samples_csv(path: str | Path) -> list[LabeledSample]:
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    samples: list[LabeledSample] = []
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise InputError(f"{path}: missing CSV header")
        missing = [c for c in SAMPLES_HEADER if c not in reader.fieldnames]
        if missing:
            raise InputError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                samples.append(
                    LabeledSample(
                        sample_id=row["sample_id"],
                        ticker=row["ticker"],
                        date=date.fromisoformat(row["date"]),
                        p0=float(row["p0"]),
                        pT=float(row["pT"]),
                        yield_ratio=float(row["yield"]),
                        label=ClassLabel(int(row["label"])),
                        image_path=row["image_path"] or None,
                    )
                )
            except (KeyError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: bad sample row: {exc}") from exc
    return samples


def with_image_path(sample: LabeledSample, image_path: str) -> LabeledSample:
    return replace(sample, image_path=image_path)
