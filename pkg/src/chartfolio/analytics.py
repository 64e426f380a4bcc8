"""Confusion metrics, yield accounting, regressions and alpha analysis.

Everything here is a pure fold over record sequences. The regression
engines are self-contained: OLS is the closed-form normal-equations
solution and the multinomial logit is a damped Newton iteration on the
exact log-likelihood, with C0 as the base alternative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .classifier import PredictionRecord, argmax_classify
from .dataset import ClassLabel, LabeledSample, YieldStats, yield_stats
from .errors import InputError

LABELS = (ClassLabel.C0, ClassLabel.C1, ClassLabel.C2)


class NonConvergenceError(InputError):
    """Raised when the logit Newton iteration detects (near-)separation."""


# ---------------------------------------------------------------------------
# Confusion matrices and per-class metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """3x3 counts; rows are true classes, columns predicted classes."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.shape != (3, 3):
            raise InputError(f"confusion matrix must be 3x3, got {arr.shape}")
        if (arr < 0).any():
            raise InputError("confusion counts must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return bool(np.array_equal(self.counts, other.counts))

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(records: Iterable[PredictionRecord]) -> ConfusionMatrix:
    """Count (true, predicted) pairs; every record must carry a prediction."""
    counts = np.zeros((3, 3), dtype=np.int64)
    for r in records:
        if r.predicted is None:
            raise InputError(f"record {r.sample_id} has no prediction")
        counts[int(r.true_label), int(r.predicted)] += 1
    return ConfusionMatrix(counts)


@dataclass(frozen=True)
class ClassMetrics:
    precision: tuple[float, float, float]
    recall: tuple[float, float, float]
    f1: tuple[float, float, float]
    support: tuple[int, int, int]
    accuracy: float
    degenerate: frozenset[ClassLabel]


def metrics(cm: ConfusionMatrix) -> ClassMetrics:
    """Precision/recall/F1 per class plus overall accuracy.

    A class with an empty column (precision) or row (recall) reports 0 for
    that metric and is flagged degenerate rather than erroring.
    """
    if cm.total == 0:
        raise InputError("empty confusion matrix")
    precision, recall, f1 = [], [], []
    degenerate = set()
    for j in range(3):
        col = int(cm.col_sums[j])
        row = int(cm.row_sums[j])
        diag = int(cm.counts[j, j])
        if col == 0 or row == 0:
            degenerate.add(ClassLabel(j))
        p = diag / col if col else 0.0
        r = diag / row if row else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(2 * p * r / (p + r) if (p + r) > 0 else 0.0)
    return ClassMetrics(
        precision=tuple(precision),
        recall=tuple(recall),
        f1=tuple(f1),
        support=tuple(int(s) for s in cm.row_sums),
        accuracy=float(np.trace(cm.counts) / cm.total),
        degenerate=frozenset(degenerate),
    )


def predicted_pool_weights(cm: ConfusionMatrix, target: ClassLabel = ClassLabel.C1) -> tuple[float, float, float]:
    """True-class composition of the pool predicted as `target`.

    This is the weight vector for the expected-yield-per-trade accounting
    (what a predicted buy actually contains), not the per-class buy rate.
    """
    col = cm.counts[:, int(target)].astype(np.float64)
    total = col.sum()
    if total == 0:
        raise InputError(f"no predictions of class {target.name}")
    w = col / total
    return (float(w[0]), float(w[1]), float(w[2]))


def buy_rates(cm: ConfusionMatrix, target: ClassLabel = ClassLabel.C1) -> tuple[float, float, float]:
    """Per-true-class probability of being predicted as `target` (row-wise)."""
    rows = cm.row_sums.astype(np.float64)
    if (rows == 0).any():
        raise InputError("every true class needs support to compute buy rates")
    r = cm.counts[:, int(target)] / rows
    return (float(r[0]), float(r[1]), float(r[2]))


def expected_yield(
    weights: Sequence[float], mean_yields: Sequence[float]
) -> float:
    """Weighted mean net yield: dot(weights, mean_yields) on the simplex."""
    w = np.asarray(weights, dtype=np.float64)
    g = np.asarray(mean_yields, dtype=np.float64)
    if w.shape != g.shape:
        raise InputError("weights and mean_yields must have equal length")
    if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
        raise InputError("weights must lie on the probability simplex")
    return float(w @ g)


# ---------------------------------------------------------------------------
# Winsorization, binning and per-yield proportions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinningConfig:
    """Yield rounding increment and winsorization bounds."""

    m: float = 0.001
    winsor_lo: float = 0.95
    winsor_hi: float = 1.05

    def __post_init__(self) -> None:
        if self.m <= 0:
            raise InputError("rounding increment m must be positive")
        if self.winsor_lo >= self.winsor_hi:
            raise InputError("winsor_lo must be below winsor_hi")


def winsorize(x: float, cfg: BinningConfig = BinningConfig()) -> float:
    """Clamp a yield into [winsor_lo, winsor_hi]."""
    return min(max(x, cfg.winsor_lo), cfg.winsor_hi)


def bin_yield(x: float, cfg: BinningConfig = BinningConfig()) -> float:
    """Round to the nearest multiple of m; exact halves go away from zero.

    Half-points are detected within 1e-9 of x/m + 1/2 to compensate for
    binary representation of decimal increments.
    """
    q = x / cfg.m
    n = math.copysign(math.floor(abs(q) + 0.5 + 1e-9), q)
    return round(n * cfg.m, 12)


@dataclass(frozen=True)
class YieldPrediction:
    """A labeled sample joined with its prediction record."""

    sample_id: str
    yield_ratio: float
    true_label: ClassLabel
    predicted: ClassLabel | None


def join_predictions(
    samples: Sequence[LabeledSample], records: Sequence[PredictionRecord]
) -> list[YieldPrediction]:
    """Match records to samples by sample_id, in record order."""
    by_id = {s.sample_id: s for s in samples}
    joined = []
    for r in records:
        sample = by_id.get(r.sample_id)
        if sample is None:
            raise InputError(f"record {r.sample_id} has no matching sample")
        joined.append(
            YieldPrediction(
                sample_id=r.sample_id,
                yield_ratio=sample.yield_ratio,
                true_label=r.true_label,
                predicted=r.predicted,
            )
        )
    return joined


@dataclass(frozen=True)
class YieldBin:
    count: int
    proportions: tuple[float, float, float]


def proportions_per_yield(
    joined: Sequence[YieldPrediction],
    cfg: BinningConfig = BinningConfig(),
    true_class: ClassLabel | None = None,
) -> dict[float, YieldBin]:
    """Per binned yield, the share of predictions going to each class.

    Yields are winsorized then binned. With `true_class` set, only samples
    of that true class enter (the per-class variant); proportions in every
    emitted bin sum to 1 over its count.
    """
    tallies: dict[float, list[int]] = {}
    for jp in joined:
        if jp.predicted is None:
            continue
        if true_class is not None and jp.true_label is not true_class:
            continue
        key = bin_yield(winsorize(jp.yield_ratio, cfg), cfg)
        tallies.setdefault(key, [0, 0, 0])[int(jp.predicted)] += 1
    out: dict[float, YieldBin] = {}
    for key in sorted(tallies):
        counts = tallies[key]
        total = sum(counts)
        out[key] = YieldBin(
            count=total,
            proportions=tuple(c / total for c in counts),
        )
    return out


def prediction_stats(
    joined: Sequence[YieldPrediction],
) -> dict[ClassLabel, YieldStats]:
    """Yield statistics of the samples grouped by *predicted* class."""
    out = {}
    for label in LABELS:
        values = [jp.yield_ratio for jp in joined if jp.predicted is label]
        if values:
            out[label] = yield_stats(values)
    return out


# ---------------------------------------------------------------------------
# OLS
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegressionFit:
    beta0: float
    beta1: float
    stderr0: float
    stderr1: float
    p_value0: float
    p_value1: float
    r_squared: float
    adj_r_squared: float
    n: int


def ols_fit(points: Sequence[tuple[float, float]]) -> RegressionFit:
    """Simple linear regression y = b0 + b1*x by the normal equations.

    p-values are two-sided t with n-2 degrees of freedom. A residual-free
    fit has zero standard errors; its p-values degenerate to 0 (or 1 for a
    coefficient that is exactly 0).
    """
    n = len(points)
    if n < 3:
        raise InputError("need at least 3 points for OLS")
    x = np.asarray([p[0] for p in points], dtype=np.float64)
    y = np.asarray([p[1] for p in points], dtype=np.float64)
    sxx = float(((x - x.mean()) ** 2).sum())
    if sxx == 0:
        raise InputError("constant regressor: OLS design is singular")

    beta1 = float(((x - x.mean()) * (y - y.mean())).sum() / sxx)
    beta0 = float(y.mean() - beta1 * x.mean())
    resid = y - beta0 - beta1 * x
    ssr = float((resid**2).sum())
    sst = float(((y - y.mean()) ** 2).sum())

    sigma2 = ssr / (n - 2)
    se1 = math.sqrt(sigma2 / sxx)
    se0 = math.sqrt(sigma2 * (1.0 / n + x.mean() ** 2 / sxx))

    def p_value(coef: float, se: float) -> float:
        if se == 0:
            return 1.0 if coef == 0 else 0.0
        return float(2.0 * sps.t.sf(abs(coef / se), df=n - 2))

    if sst == 0:
        r2 = 1.0 if ssr <= 1e-300 else 0.0
    else:
        r2 = 1.0 - ssr / sst
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / (n - 2)

    return RegressionFit(
        beta0=beta0,
        beta1=beta1,
        stderr0=se0,
        stderr1=se1,
        p_value0=p_value(beta0, se0),
        p_value1=p_value(beta1, se1),
        r_squared=r2,
        adj_r_squared=adj_r2,
        n=n,
    )


def proportion_regressions(
    joined: Sequence[YieldPrediction],
    cfg: BinningConfig = BinningConfig(),
) -> dict[ClassLabel, RegressionFit]:
    """Per predicted class j: OLS of the per-bin share of j on the yield."""
    bins = proportions_per_yield(joined, cfg)
    out = {}
    for label in LABELS:
        points = [(gamma, yb.proportions[int(label)]) for gamma, yb in bins.items()]
        out[label] = ols_fit(points)
    return out


def per_class_regressions(
    joined: Sequence[YieldPrediction],
    cfg: BinningConfig = BinningConfig(),
) -> dict[tuple[ClassLabel, ClassLabel], RegressionFit | None]:
    """The nine (true j, predicted k) share-on-yield regressions.

    Cells with fewer than 3 bins (or a constant yield axis) carry None;
    small true classes can legitimately produce too few bins to fit.
    """
    out: dict[tuple[ClassLabel, ClassLabel], RegressionFit | None] = {}
    for true_label in LABELS:
        bins = proportions_per_yield(joined, cfg, true_class=true_label)
        xs = sorted(bins)
        for pred_label in LABELS:
            points = [(gamma, bins[gamma].proportions[int(pred_label)]) for gamma in xs]
            if len(points) < 3 or len({p[0] for p in points}) < 2:
                out[(true_label, pred_label)] = None
                continue
            out[(true_label, pred_label)] = ols_fit(points)
    return out


# ---------------------------------------------------------------------------
# Multinomial logit (base class C0)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MnlFit:
    """Two-alternative logit vs the C0 baseline: utilities b_j0 + b_j1*x."""

    intercepts: tuple[float, float]  # classes C1, C2
    slopes: tuple[float, float]
    se_intercepts: tuple[float, float]
    se_slopes: tuple[float, float]
    p_intercepts: tuple[float, float]
    p_slopes: tuple[float, float]
    log_likelihood: float
    ll_null: float
    llr_chi2: float
    llr_p_value: float
    converged: bool
    iterations: int
    gradient_norm: float
    ll_path: tuple[float, ...]


def _mnl_probs(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    """(n,3) class probabilities for parameters (b10, b11, b20, b21)."""
    u = np.zeros((x.size, 3))
    u[:, 1] = theta[0] + theta[1] * x
    u[:, 2] = theta[2] + theta[3] * x
    u -= u.max(axis=1, keepdims=True)
    e = np.exp(u)
    return e / e.sum(axis=1, keepdims=True)


def _mnl_ll(theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
    p = _mnl_probs(theta, x)
    return float(np.log(p[np.arange(x.size), y]).sum())


def mnl_fit(
    points: Sequence[tuple[float, ClassLabel]],
    max_iter: int = 100,
    tol: float = 1e-10,
    separation_bound: float = 1e4,
) -> MnlFit:
    """Maximum-likelihood multinomial logit of predicted class on yield.

    Newton iteration on the full 4-parameter system with a 1e-8 ridge on
    the Hessian and step-halving so the log-likelihood never decreases.
    Stops when the largest parameter step drops below `tol` or after
    `max_iter` iterations. Perfect separation has no finite optimum and
    raises NonConvergenceError, detected either by the parameter max-norm
    passing `separation_bound` or by the log-likelihood reaching machine
    zero (a finite parameter vector cannot fit every point perfectly).
    Wald p-values use the normal approximation; the LLR chi-square has 2
    degrees of freedom (the two slopes beyond the intercepts-only null).
    """
    if len(points) < 10:
        raise InputError("need at least 10 points for the multinomial logit")
    x = np.asarray([p[0] for p in points], dtype=np.float64)
    y = np.asarray([int(p[1]) for p in points], dtype=np.int64)
    class_counts = np.bincount(y, minlength=3)
    if (class_counts == 0).any():
        raise InputError("all three classes must be present")

    n = x.size
    z = np.column_stack([np.ones(n), x])  # per-record basis (1, x)
    indicators = np.zeros((n, 3))
    indicators[np.arange(n), y] = 1.0

    theta = np.zeros(4)
    ll = _mnl_ll(theta, x, y)
    ll_path = [ll]
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        p = _mnl_probs(theta, x)
        grad = np.empty(4)
        for j in (1, 2):
            resid = indicators[:, j] - p[:, j]
            grad[2 * (j - 1) : 2 * j] = resid @ z

        hess = np.zeros((4, 4))
        for j in (1, 2):
            for k in (1, 2):
                w = p[:, j] * ((1.0 if j == k else 0.0) - p[:, k])
                block = (z * w[:, None]).T @ z
                hess[2 * (j - 1) : 2 * j, 2 * (k - 1) : 2 * k] = -block

        step = np.linalg.solve(-hess + 1e-8 * np.eye(4), grad)

        lam = 1.0
        for _ in range(60):
            candidate = theta + lam * step
            ll_new = _mnl_ll(candidate, x, y)
            if ll_new >= ll - 1e-12:
                break
            lam *= 0.5
        theta = theta + lam * step
        ll = _mnl_ll(theta, x, y)
        ll_path.append(ll)

        if np.abs(theta).max() > separation_bound or ll > -1e-8 * n:
            raise NonConvergenceError(
                "multinomial logit did not converge: the data are (near-)"
                "perfectly separated, so no finite optimum exists"
            )
        if np.abs(lam * step).max() < tol:
            converged = True
            break

    p = _mnl_probs(theta, x)
    grad = np.empty(4)
    for j in (1, 2):
        grad[2 * (j - 1) : 2 * j] = (indicators[:, j] - p[:, j]) @ z
    hess = np.zeros((4, 4))
    for j in (1, 2):
        for k in (1, 2):
            w = p[:, j] * ((1.0 if j == k else 0.0) - p[:, k])
            hess[2 * (j - 1) : 2 * j, 2 * (k - 1) : 2 * k] = -(z * w[:, None]).T @ z
    try:
        cov = np.linalg.inv(-hess)
    except np.linalg.LinAlgError:
        cov = np.linalg.inv(-hess + 1e-10 * np.eye(4))
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        zscores = np.where(se > 0, theta / se, np.inf)
    p_values = 2.0 * sps.norm.sf(np.abs(zscores))

    shares = class_counts / n
    ll_null = float((class_counts * np.log(shares)).sum())
    llr = max(0.0, 2.0 * (ll - ll_null))

    return MnlFit(
        intercepts=(float(theta[0]), float(theta[2])),
        slopes=(float(theta[1]), float(theta[3])),
        se_intercepts=(float(se[0]), float(se[2])),
        se_slopes=(float(se[1]), float(se[3])),
        p_intercepts=(float(p_values[0]), float(p_values[2])),
        p_slopes=(float(p_values[1]), float(p_values[3])),
        log_likelihood=ll,
        ll_null=ll_null,
        llr_chi2=llr,
        llr_p_value=float(sps.chi2.sf(llr, df=2)),
        converged=converged,
        iterations=iterations,
        gradient_norm=float(np.abs(grad).max()),
        ll_path=tuple(ll_path),
    )


def mnl_predict_probs(
    fit: MnlFit | Sequence[tuple[float, float]], x: float
) -> tuple[float, float, float]:
    """Class probabilities at yield x: softmax of (0, u1(x), u2(x)).

    Accepts a fitted model or raw ((b10,b11),(b20,b21)) coefficient pairs.
    """
    if isinstance(fit, MnlFit):
        coef = ((fit.intercepts[0], fit.slopes[0]), (fit.intercepts[1], fit.slopes[1]))
    else:
        coef = tuple(fit)
        if len(coef) != 2:
            raise InputError("expected coefficient pairs for classes C1 and C2")
    u = np.array([0.0, coef[0][0] + coef[0][1] * x, coef[1][0] + coef[1][1] * x])
    u -= u.max()
    e = np.exp(u)
    p = e / e.sum()
    return (float(p[0]), float(p[1]), float(p[2]))


# ---------------------------------------------------------------------------
# Alpha sweep and the optimal threshold search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlphaSweepPoint:
    alpha: float
    classified_count: int
    classified_fraction: float
    c1_fraction: float
    correct_fraction: float | None  # None when nothing is classified


@dataclass(frozen=True)
class AlphaSweepCurve:
    points: tuple[AlphaSweepPoint, ...]


def alpha_sweep(
    records: Sequence[PredictionRecord], alphas: Sequence[float]
) -> AlphaSweepCurve:
    """Classified volume, C1 volume and accuracy across approval thresholds.

    Fractions are of the full record set; correct_fraction is among the
    classified only. classified_count is non-increasing in alpha by
    construction.
    """
    if not records:
        raise InputError("no records to sweep")
    n = len(records)
    maxes = np.array([max(r.softmax) for r in records])
    calls = np.array([int(argmax_classify(r)) for r in records])
    truths = np.array([int(r.true_label) for r in records])

    points = []
    for alpha in sorted(alphas):
        mask = maxes >= alpha
        count = int(mask.sum())
        c1 = int(((calls == 1) & mask).sum())
        correct = int(((calls == truths) & mask).sum())
        points.append(
            AlphaSweepPoint(
                alpha=float(alpha),
                classified_count=count,
                classified_fraction=count / n,
                c1_fraction=c1 / n,
                correct_fraction=(correct / count) if count else None,
            )
        )
    return AlphaSweepCurve(points=tuple(points))


@dataclass(frozen=True)
class AlphaStarResult:
    candidates: tuple[float, ...]
    expected_values: tuple[float, ...]  # aligned with the curve's points
    derivative_diagnostic: dict[float, float]
    flat: bool


def alpha_star_search(
    curve: AlphaSweepCurve, gamma1: float, gamma0: float = 0.0
) -> AlphaStarResult:
    """Grid maximizers of E = f(alpha) * (g*gamma1 + (1-g)*gamma0).

    f is the classified count (prediction volume) and g the correct
    fraction. All maximizers are returned since the first-order condition
    f'/f + g'/g = 0 need not have a unique root; that condition is also
    evaluated by central differences at interior grid points as a
    diagnostic, not a filter.
    """
    pts = curve.points
    if len(pts) < 5:
        raise InputError("alpha_star_search needs at least 5 grid points")

    e_values = []
    for p in pts:
        g = p.correct_fraction if p.correct_fraction is not None else 0.0
        e_values.append(p.classified_count * (g * gamma1 + (1.0 - g) * gamma0))

    e_max = max(e_values)
    e_min = min(e_values)
    span = max(abs(e_max), abs(e_min), 1e-300)
    flat = (e_max - e_min) <= 1e-12 * span
    if flat:
        candidates = tuple(p.alpha for p in pts)
    else:
        candidates = tuple(
            p.alpha
            for p, e in zip(pts, e_values)
            if e >= e_max - 1e-12 * span
        )

    diagnostic: dict[float, float] = {}
    for i in range(1, len(pts) - 1):
        f_i = pts[i].classified_count
        g_i = pts[i].correct_fraction
        if not f_i or not g_i:
            continue
        da = pts[i + 1].alpha - pts[i - 1].alpha
        if da <= 0:
            continue
        df = (pts[i + 1].classified_count - pts[i - 1].classified_count) / da
        g_hi = pts[i + 1].correct_fraction or 0.0
        g_lo = pts[i - 1].correct_fraction or 0.0
        dg = (g_hi - g_lo) / da
        diagnostic[pts[i].alpha] = df / f_i + dg / g_i

    return AlphaStarResult(
        candidates=candidates,
        expected_values=tuple(e_values),
        derivative_diagnostic=diagnostic,
        flat=flat,
    )


# ---------------------------------------------------------------------------
# Distribution statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistStats:
    count: int
    mean: float
    median: float
    stdev: float
    skewness: float | None  # None when the sample has zero variance
    q1: float
    q3: float
    histogram: dict[float, int]


def dist_stats(values: Sequence[float], increment: float = 0.001) -> DistStats:
    """Moments, quartiles and a discretized frequency table.

    Skewness is the moment-based Fisher-Pearson g1 = m3 / m2^(3/2) on
    population moments; it is undefined (None) for zero-variance samples.
    The histogram keys are bin_yield values at the given increment.
    """
    if len(values) < 2:
        raise InputError("need at least 2 values for distribution stats")
    arr = np.asarray(values, dtype=np.float64)
    dev = arr - arr.mean()
    m2 = float((dev**2).mean())
    m3 = float((dev**3).mean())
    skew = None if m2 == 0 else m3 / m2**1.5

    cfg = BinningConfig(m=increment)
    histogram: dict[float, int] = {}
    for v in arr:
        key = bin_yield(float(v), cfg)
        histogram[key] = histogram.get(key, 0) + 1

    return DistStats(
        count=int(arr.size),
        mean=float(arr.mean()),
        median=float(np.quantile(arr, 0.5)),
        stdev=float(arr.std(ddof=0)),
        skewness=skew,
        q1=float(np.quantile(arr, 0.25)),
        q3=float(np.quantile(arr, 0.75)),
        histogram=dict(sorted(histogram.items())),
    )
