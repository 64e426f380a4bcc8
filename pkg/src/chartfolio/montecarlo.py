"""Truncated-normal sampling, break-even algebra and the MC trading harness.

A repetition draws a fixed count of yields per class, shuffles their arrival
order, and walks them sequentially: each draw is bought with its class's buy
probability, investing min(current wealth, cap) clamped at zero. Streams are
derived per repetition, so results are bit-identical for a given seed no
matter how repetitions are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from .config import kv_float, kv_int, read_kv
from .errors import InputError
from .rng import stream

MIN_TRUNCATION_MASS = 1e-300


@dataclass(frozen=True)
class TruncNormalSpec:
    """N(mu, sigma^2) restricted to [a, b]; infinite bounds allowed."""

    mu: float
    sigma: float
    a: float = -math.inf
    b: float = math.inf

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise InputError("sigma must be positive")
        if not self.a < self.b:
            raise InputError("truncation requires a < b")
        if self._mass() < MIN_TRUNCATION_MASS:
            raise InputError("truncation interval carries no probability mass")

    def _std_bounds(self) -> tuple[float, float]:
        return (self.a - self.mu) / self.sigma, (self.b - self.mu) / self.sigma

    def _mass(self) -> float:
        alpha, beta = self._std_bounds()
        return float(ndtr(beta) - ndtr(alpha))


def _std_pdf(z: float) -> float:
    if math.isinf(z):
        return 0.0
    return math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def truncnorm_mean(spec: TruncNormalSpec) -> float:
    """Closed-form mean: mu + sigma*(phi(alpha) - phi(beta))/Z."""
    alpha, beta = spec._std_bounds()
    return spec.mu + spec.sigma * (_std_pdf(alpha) - _std_pdf(beta)) / spec._mass()


def truncnorm_cdf(spec: TruncNormalSpec, x: np.ndarray | float) -> np.ndarray | float:
    """CDF of the truncated distribution, for goodness-of-fit checks."""
    alpha, beta = spec._std_bounds()
    lo = ndtr(alpha)
    z = (np.asarray(x, dtype=np.float64) - spec.mu) / spec.sigma
    out = np.clip((ndtr(z) - lo) / spec._mass(), 0.0, 1.0)
    return float(out) if np.isscalar(x) else out


def sample_truncnorm(
    spec: TruncNormalSpec, rng: np.random.Generator, size: int | None = None
):
    """Inverse-CDF draws: mu + sigma*ndtri(F(a) + u*(F(b)-F(a))).

    One uniform consumed per draw, so the stream position advances
    deterministically; values are clipped into [a, b] against boundary
    rounding of the inverse normal CDF.
    """
    alpha, beta = spec._std_bounds()
    lo, hi = ndtr(alpha), ndtr(beta)
    u = rng.random(size)
    draws = spec.mu + spec.sigma * ndtri(lo + u * (hi - lo))
    return np.clip(draws, spec.a, spec.b)


@dataclass(frozen=True)
class McClass:
    spec: TruncNormalSpec
    count: int
    buy_prob: float

    def __post_init__(self) -> None:
        if self.count <= 0:
            raise InputError("class draw count must be positive")
        if not 0.0 <= self.buy_prob <= 1.0:
            raise InputError("buy probability must lie in [0,1]")


@dataclass(frozen=True)
class McExperiment:
    classes: tuple[McClass, McClass, McClass]
    initial_wealth: float = 1000.0
    per_trade_cap: float = 1000.0
    repetitions: int = 10000
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.classes) != 3:
            raise InputError("experiment needs exactly 3 classes")
        if self.initial_wealth <= 0:
            raise InputError("initial wealth must be positive")
        if self.per_trade_cap < 0:
            raise InputError("per-trade cap must be non-negative")
        if self.repetitions <= 0:
            raise InputError("repetitions must be positive")

    @property
    def draws_per_repetition(self) -> int:
        return sum(c.count for c in self.classes)


@dataclass(frozen=True)
class McResult:
    final_wealth: np.ndarray
    mean: float
    median: float
    stdev: float
    min: float
    max: float
    mean_yield_per_draw: float


def _repetition_draws(
    exp: McExperiment, rep: int
) -> tuple[np.ndarray, np.ndarray]:
    """(yields, buy flags) in arrival order for one repetition's stream."""
    rng = stream(exp.seed, "mc", rep)
    yields = np.concatenate(
        [sample_truncnorm(c.spec, rng, size=c.count) for c in exp.classes]
    )
    classes = np.concatenate(
        [np.full(c.count, j, dtype=np.int64) for j, c in enumerate(exp.classes)]
    )
    order = rng.permutation(yields.size)
    yields, classes = yields[order], classes[order]
    buy_probs = np.array([c.buy_prob for c in exp.classes])
    buys = rng.random(yields.size) < buy_probs[classes]
    return yields, buys


def run_experiment(exp: McExperiment) -> McResult:
    """Run all repetitions and aggregate final wealth.

    Wealth update per draw t: invest s = max(0, min(v, cap)) if bought,
    then v += s * yield_t. The final-wealth vector is indexed by
    repetition, so aggregation order cannot change any reported figure.
    """
    reps, total = exp.repetitions, exp.draws_per_repetition
    yields = np.empty((reps, total))
    buys = np.empty((reps, total), dtype=bool)
    for rep in range(reps):
        yields[rep], buys[rep] = _repetition_draws(exp, rep)

    wealth = np.full(reps, exp.initial_wealth)
    for t in range(total):
        sizes = np.clip(wealth, 0.0, exp.per_trade_cap) * buys[:, t]
        wealth = wealth + sizes * yields[:, t]

    mean = float(wealth.mean())
    return McResult(
        final_wealth=wealth,
        mean=mean,
        median=float(np.median(wealth)),
        stdev=float(wealth.std(ddof=0)),
        min=float(wealth.min()),
        max=float(wealth.max()),
        mean_yield_per_draw=(mean / exp.initial_wealth - 1.0) / total,
    )


@dataclass(frozen=True)
class BreakEvenInputs:
    """Mean class yields, buy probabilities and the fixed class sizes."""

    gamma1: float
    gamma2: float
    gamma3: float
    pi1: float
    pi2: float
    pi3: float
    n2: float
    n3: float

    def __post_init__(self) -> None:
        if self.gamma1 < 0 or self.gamma3 > 0:
            raise InputError("setup expects gamma1 >= 0 and gamma3 <= 0")
        for name in ("pi1", "pi2", "pi3"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InputError(f"{name} must lie in [0,1]")
        if self.n2 < 0 or self.n3 < 0:
            raise InputError("class sizes must be non-negative")


@dataclass(frozen=True)
class BreakEvenResult:
    n1_min: float
    ratio_n1_n3: float | None  # None when n3 == 0
    k2: float
    k3: float


def break_even_ratio(inp: BreakEvenInputs) -> BreakEvenResult:
    """Boundary of n1*g1*p1 + n2*g2*p2 + n3*g3*p3 >= 0 solved for n1.

    n1_min = -k2*n2 - k3*n3 with k_i = (gamma_i*pi_i)/(gamma1*pi1); the
    negative class makes k3 <= 0, so breaking even needs n1 roughly
    proportional to n3.
    """
    denom = inp.gamma1 * inp.pi1
    if denom == 0:
        raise InputError("gamma1*pi1 must be non-zero for the break-even boundary")
    k2 = (inp.gamma2 * inp.pi2) / denom
    k3 = (inp.gamma3 * inp.pi3) / denom
    n1_min = -k2 * inp.n2 - k3 * inp.n3
    return BreakEvenResult(
        n1_min=n1_min,
        ratio_n1_n3=(n1_min / inp.n3) if inp.n3 > 0 else None,
        k2=k2,
        k3=k3,
    )


def experiment_from_file(
    path: str | Path,
    repetitions: int | None = None,
    seed: int | None = None,
) -> McExperiment:
    """Build an experiment from flat key=value config (class1..class3 keys)."""
    kv = read_kv(path)
    classes = []
    for j in (1, 2, 3):
        prefix = f"class{j}."
        classes.append(
            McClass(
                spec=TruncNormalSpec(
                    mu=kv_float(kv, prefix + "mu"),
                    sigma=kv_float(kv, prefix + "sigma"),
                    a=kv_float(kv, prefix + "a", -math.inf),
                    b=kv_float(kv, prefix + "b", math.inf),
                ),
                count=kv_int(kv, prefix + "count"),
                buy_prob=kv_float(kv, prefix + "buy_prob"),
            )
        )
    return McExperiment(
        classes=(classes[0], classes[1], classes[2]),
        initial_wealth=kv_float(kv, "initial_wealth", 1000.0),
        per_trade_cap=kv_float(kv, "per_trade_cap", 1000.0),
        repetitions=repetitions if repetitions is not None else kv_int(kv, "repetitions", 10000),
        seed=seed if seed is not None else kv_int(kv, "seed", 0),
    )
