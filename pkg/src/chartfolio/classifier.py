"""Prediction sources: a stochastic confusion channel and softmax replay.

Both sources produce the same PredictionRecord shape, so the downstream
metrics, alpha filtering and backtests run identically on simulated and
real classifier output.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import read_kv
from .dataset import ClassLabel
from .errors import InputError
from .rng import stream

SOFTMAX_TOL = 1e-9
REPLAY_SUM_TOL = 1e-6

REPLAY_HEADER = ("sample_id", "true_label", "prob0", "prob1", "prob2")


@dataclass(frozen=True, eq=False)
class ChannelMatrix:
    """Row-stochastic 3x3 matrix: probs[i][j] = Pr(predict j | true i)."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.probs, dtype=np.float64)
        if arr.shape != (3, 3):
            raise InputError(f"channel must be 3x3, got {arr.shape}")
        if (arr < 0).any() or (arr > 1).any():
            raise InputError("channel entries must lie in [0,1]")
        if np.abs(arr.sum(axis=1) - 1.0).max() > 1e-12:
            raise InputError("channel rows must sum to 1 within 1e-12")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ChannelMatrix):
            return NotImplemented
        return bool(np.array_equal(self.probs, other.probs))

    @classmethod
    def identity(cls) -> "ChannelMatrix":
        return cls(np.eye(3))

    @classmethod
    def from_counts(cls, counts) -> "ChannelMatrix":
        """Row-normalize a confusion-count matrix into a channel."""
        arr = np.asarray(counts, dtype=np.float64)
        row_sums = arr.sum(axis=1, keepdims=True)
        if (row_sums <= 0).any():
            raise InputError("every true class needs at least one count")
        return cls(arr / row_sums)

    @classmethod
    def from_file(cls, path) -> "ChannelMatrix":
        """Read `row0..row2 = p0,p1,p2` (or `counts0..counts2`) key=value."""
        kv = read_kv(path)
        if all(f"row{i}" in kv for i in range(3)):
            keys, normalize = ("row0", "row1", "row2"), False
        elif all(f"counts{i}" in kv for i in range(3)):
            keys, normalize = ("counts0", "counts1", "counts2"), True
        else:
            raise InputError(f"{path}: need keys row0..row2 or counts0..counts2")
        rows = []
        for key in keys:
            parts = [p.strip() for p in kv[key].split(",")]
            if len(parts) != 3:
                raise InputError(f"{path}: {key} must have 3 comma-separated values")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise InputError(f"{path}: {key}: {exc}") from exc
        return cls.from_counts(rows) if normalize else cls(np.asarray(rows))


@dataclass(frozen=True)
class PredictionRecord:
    """One sample's posterior vector, truth, and (optional) accepted call."""

    sample_id: str
    true_label: ClassLabel
    softmax: tuple[float, float, float]
    predicted: ClassLabel | None = None

    def __post_init__(self) -> None:
        if len(self.softmax) != 3:
            raise InputError("softmax must have 3 entries")
        if any(p < 0 for p in self.softmax):
            raise InputError("softmax entries must be non-negative")
        if abs(sum(self.softmax) - 1.0) > SOFTMAX_TOL:
            raise InputError(f"softmax sums to {sum(self.softmax)}, not 1")


@dataclass(frozen=True)
class ApprovalThreshold:
    """Minimum posterior required to accept the argmax classification."""

    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must be in (0,1)")


@dataclass(frozen=True)
class ConfidenceSpec:
    """Beta shape for the synthesized top-class confidence in channel mode."""

    a: float = 4.0
    b: float = 2.0

    def __post_init__(self) -> None:
        if self.a <= 0 or self.b <= 0:
            raise InputError("beta shape parameters must be positive")


def channel_classify(
    true_label: ClassLabel, channel: ChannelMatrix, rng: np.random.Generator
) -> ClassLabel:
    """Draw a predicted label from the channel row via inverse CDF."""
    u = rng.random()
    acc = 0.0
    row = channel.probs[int(true_label)]
    for j in range(2):
        acc += row[j]
        if u < acc:
            return ClassLabel(j)
    return ClassLabel(2)


def synth_softmax(
    true_label: ClassLabel,
    predicted: ClassLabel,
    channel: ChannelMatrix,
    rng: np.random.Generator,
    confidence: ConfidenceSpec = ConfidenceSpec(),
) -> tuple[float, float, float]:
    """Synthesize a softmax vector whose argmax is the drawn prediction.

    The predicted class gets 1/3 + (2/3)*Beta(a,b); the remainder is split
    over the other two classes proportional to the channel row, falling back
    to an equal split whenever the proportional one would outweigh the
    predicted class.
    """
    conf = 1.0 / 3.0 + (2.0 / 3.0) * float(rng.beta(confidence.a, confidence.b))
    rest = 1.0 - conf
    others = [j for j in range(3) if j != int(predicted)]
    row = channel.probs[int(true_label)]
    weight_sum = float(row[others[0]] + row[others[1]])
    if weight_sum > 0:
        shares = [rest * float(row[j]) / weight_sum for j in others]
    else:
        shares = [rest / 2.0, rest / 2.0]
    if max(shares) >= conf:
        shares = [rest / 2.0, rest / 2.0]
    out = [0.0, 0.0, 0.0]
    out[int(predicted)] = conf
    out[others[0]], out[others[1]] = shares
    return (out[0], out[1], out[2])


def simulate_records(
    items: Iterable[tuple[str, ClassLabel]],
    channel: ChannelMatrix,
    seed: int,
    confidence: ConfidenceSpec = ConfidenceSpec(),
) -> list[PredictionRecord]:
    """Run (sample_id, true_label) pairs through the channel.

    Each sample draws from its own (seed, sample_id) stream, so results do
    not depend on iteration order or parallel scheduling.
    """
    records = []
    for sample_id, true_label in items:
        rng = stream(seed, "channel", sample_id)
        predicted = channel_classify(true_label, channel, rng)
        softmax = synth_softmax(true_label, predicted, channel, rng, confidence)
        records.append(
            PredictionRecord(
                sample_id=sample_id,
                true_label=true_label,
                softmax=softmax,
                predicted=predicted,
            )
        )
    return records


def argmax_classify(record: PredictionRecord) -> ClassLabel:
    """Index of the maximum posterior; ties break to the lowest class."""
    best = 0
    for j in (1, 2):
        if record.softmax[j] > record.softmax[best]:
            best = j
    return ClassLabel(best)


def alpha_filter(
    records: Sequence[PredictionRecord], alpha: float | ApprovalThreshold
) -> tuple[list[PredictionRecord], list[PredictionRecord]]:
    """Partition into (classified, abstained) by max softmax >= alpha.

    Classified records carry their argmax prediction; abstained ones carry
    none. The two lists always partition the input.
    """
    if isinstance(alpha, ApprovalThreshold):
        alpha = alpha.alpha
    classified: list[PredictionRecord] = []
    abstained: list[PredictionRecord] = []
    for record in records:
        if max(record.softmax) >= alpha:
            classified.append(replace(record, predicted=argmax_classify(record)))
        else:
            abstained.append(replace(record, predicted=None))
    return classified, abstained


@dataclass(frozen=True)
class ReplayRowError:
    line: int
    message: str


@dataclass
class ReplayLoadResult:
    records: list[PredictionRecord]
    row_errors: list[ReplayRowError]


def replay_load(path: str | Path) -> ReplayLoadResult:
    """Read a replay CSV; rows off the probability simplex are reported.

    Rows within 1e-6 of the simplex are renormalized to satisfy the record
    invariant; anything further off is a row error. An optional `predicted`
    column (as written by the classify pipeline) is honored when present.
    """
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc

    records: list[PredictionRecord] = []
    row_errors: list[ReplayRowError] = []
    with handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise InputError(f"{path}: missing CSV header")
        missing = [c for c in REPLAY_HEADER if c not in reader.fieldnames]
        if missing:
            raise InputError(f"{path}: missing columns {missing}")
        has_predicted = "predicted" in reader.fieldnames

        for lineno, row in enumerate(reader, start=2):
            try:
                sample_id = row["sample_id"]
                if not sample_id:
                    raise InputError("missing sample_id")
                true_label = ClassLabel(int(row["true_label"]))
                probs = [float(row[f"prob{j}"]) for j in range(3)]
                if any(p < 0 for p in probs):
                    raise InputError("negative probability")
                total = sum(probs)
                if abs(total - 1.0) > REPLAY_SUM_TOL:
                    raise InputError(f"probabilities sum to {total}, not 1")
                probs = [p / total for p in probs]
                predicted = None
                if has_predicted and row["predicted"] not in (None, ""):
                    predicted = ClassLabel(int(row["predicted"]))
                records.append(
                    PredictionRecord(
                        sample_id=sample_id,
                        true_label=true_label,
                        softmax=(probs[0], probs[1], probs[2]),
                        predicted=predicted,
                    )
                )
            except (InputError, KeyError, ValueError) as exc:
                row_errors.append(ReplayRowError(lineno, str(exc)))
    return ReplayLoadResult(records=records, row_errors=row_errors)


def write_records_csv(records: Iterable[PredictionRecord], path: str | Path) -> None:
    """Replay schema plus a `predicted` column (blank when abstained)."""
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPLAY_HEADER + ("predicted",))
        for r in records:
            writer.writerow(
                (
                    r.sample_id,
                    int(r.true_label),
                    repr(r.softmax[0]),
                    repr(r.softmax[1]),
                    repr(r.softmax[2]),
                    "" if r.predicted is None else int(r.predicted),
                )
            )
