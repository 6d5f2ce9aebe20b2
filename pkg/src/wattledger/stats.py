"""Repetition statistics: summaries, two-sample comparisons, sampling checks.

No multiple-comparison correction is applied; callers comparing many
conditions must correct the p-values themselves.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as _sps

from .errors import DataError
from .estimation import EnergyEstimate, Scope
from .telemetry import PowerTrace, diagnose

__all__ = [
    "RunSet",
    "Summary",
    "ComparisonResult",
    "SamplingAdequacy",
    "summarize",
    "compare",
    "check_sampling",
    "MIN_SAMPLE_INTERVAL_S",
    "MIN_SPAN_S",
    "MIN_SAMPLES_IN_WINDOW",
]

MIN_SAMPLE_INTERVAL_S = 0.1
MIN_SPAN_S = 0.1
MIN_SAMPLES_IN_WINDOW = 10


@dataclass(frozen=True)
class RunSet:
    label: str
    estimates: tuple[EnergyEstimate, ...]
    condition: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        ests = tuple(self.estimates)
        if not ests:
            raise ValueError(f"run set {self.label!r} is empty")
        first = ests[0]
        for e in ests[1:]:
            if e.basis is not first.basis or e.method is not first.method:
                raise DataError(
                    f"run set {self.label!r} mixes bases or methods; only compare "
                    "results measured with the same methodology and scope"
                )
        object.__setattr__(self, "estimates", ests)

    @classmethod
    def from_joules(cls, label: str, joules: Sequence[float], **kwargs) -> "RunSet":
        scope = Scope("node", (label,))
        ests = tuple(
            EnergyEstimate(joules=float(j), start=0.0, end=1.0, method="zero_order", scope=scope)
            for j in joules
        )
        return cls(label, ests, **kwargs)

    @property
    def joules(self) -> np.ndarray:
        return np.array([e.joules for e in self.estimates])

    def methodology(self) -> tuple:
        e = self.estimates[0]
        return (e.basis, e.method, e.scope.level, e.pue_applied)


@dataclass(frozen=True)
class Summary:
    n: int
    mean: float
    stddev: float | None
    _ci: tuple[float, float] | None = field(default=None, repr=False)

    @property
    def ci95(self) -> tuple[float, float]:
        if self._ci is None:
            raise ValueError("a confidence interval needs at least two estimates")
        return self._ci

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean_j": self.mean,
            "stddev_j": self.stddev,
            "ci95_j": list(self._ci) if self._ci is not None else None,
        }


@dataclass(frozen=True)
class ComparisonResult:
    mean_diff_joules: float
    ci95: tuple[float, float]
    p_value: float
    test: str
    n: tuple[int, int]
    alpha: float = 0.05
    statistic: float | None = None
    df: float | None = None

    @property
    def significant(self) -> bool:
        return self.p_value < self.alpha

    def to_dict(self) -> dict:
        return {
            "mean_diff_j": self.mean_diff_joules,
            "ci95_j": list(self.ci95),
            "p_value": self.p_value,
            "test": self.test,
            "n": list(self.n),
            "alpha": self.alpha,
            "statistic": self.statistic,
            "df": self.df,
        }


@dataclass(frozen=True)
class SamplingAdequacy:
    samples_in_window: int
    min_interval: float
    warnings: tuple[str, ...]


def summarize(rs: RunSet, level: float = 0.95) -> Summary:
    """Mean, sample standard deviation and Student-t confidence interval."""
    x = rs.joules
    n = x.size
    mean = float(np.mean(x))
    if n < 2:
        return Summary(n=n, mean=mean, stddev=None)
    sd = float(np.std(x, ddof=1))
    half = float(_sps.t.ppf(0.5 + level / 2, n - 1)) * sd / math.sqrt(n)
    return Summary(n=n, mean=mean, stddev=sd, _ci=(mean - half, mean + half))


def _welch(a: np.ndarray, b: np.ndarray, alpha: float):
    diff = float(np.mean(a) - np.mean(b))
    va, vb = np.var(a, ddof=1) / a.size, np.var(b, ddof=1) / b.size
    se2 = float(va + vb)
    if se2 == 0:
        # degenerate: constant samples. Equal means are indistinguishable,
        # unequal means are separated with certainty.
        p = 1.0 if diff == 0 else 0.0
        return diff, (diff, diff), p, None, None
    se = math.sqrt(se2)
    t = diff / se
    # Welch-Satterthwaite, written in variance shares to avoid underflow
    ra, rb = va / se2, vb / se2
    df = 1.0 / (ra**2 / (a.size - 1) + rb**2 / (b.size - 1))
    p = float(min(1.0, 2 * _sps.t.sf(abs(t), df)))
    q = float(_sps.t.ppf(1 - alpha / 2, df))
    return diff, (diff - q * se, diff + q * se), p, t, float(df)


def _permutation_p(
    a: np.ndarray, b: np.ndarray, seed: int, n_resamples: int, max_exact: int
) -> float:
    # the p-value must not depend on argument order, so work on a canonical
    # ordering of the two samples
    if (b.size, sorted(b.tolist())) < (a.size, sorted(a.tolist())):
        a, b = b, a
    pooled = np.concatenate([a, b])
    n, na = pooled.size, a.size
    observed = abs(np.mean(a) - np.mean(b))
    # relative slack so ties survive float summation order
    tol = 1e-12 * max(1.0, float(np.max(np.abs(pooled))))
    total = pooled.sum()

    def diffs(sums_a: np.ndarray) -> np.ndarray:
        return np.abs(sums_a / na - (total - sums_a) / (n - na))

    if math.comb(n, na) <= max_exact:
        idx = np.array(list(itertools.combinations(range(n), na)), dtype=np.intp)
        d = diffs(pooled[idx].sum(axis=1))
        return float(np.count_nonzero(d >= observed - tol)) / d.size
    rng = np.random.default_rng(seed)
    hits = 0
    batch = 1000
    for done in range(0, n_resamples, batch):
        k = min(batch, n_resamples - done)
        perms = rng.permuted(np.tile(pooled, (k, 1)), axis=1)
        hits += int(np.count_nonzero(diffs(perms[:, :na].sum(axis=1)) >= observed - tol))
    return (hits + 1) / (n_resamples + 1)


def compare(
    a: RunSet,
    b: RunSet,
    test: str = "welch_t",
    alpha: float = 0.05,
    *,
    seed: int = 0,
    n_resamples: int = 10_000,
    max_exact: int = 20_000,
) -> ComparisonResult:
    """Compare mean energy of two run sets (``a - b``).

    ``welch_t`` is Welch's unequal-variance t-test with Welch-Satterthwaite
    degrees of freedom. ``permutation`` enumerates all splits when there are
    at most ``max_exact`` of them, otherwise draws ``n_resamples`` seeded
    random permutations. Two constant sets give p = 1 when their means match
    and p = 0 otherwise.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if a.methodology() != b.methodology():
        raise DataError(
            "run sets differ in basis, method, scope level or PUE; only compare "
            "results that were measured with the same methodology and scope"
        )
    xa, xb = a.joules, b.joules
    if test == "welch_t":
        if xa.size < 2 or xb.size < 2:
            raise ValueError("welch_t needs at least two estimates per run set")
        diff, ci, p, t, df = _welch(xa, xb, alpha)
        return ComparisonResult(diff, ci, p, test, (xa.size, xb.size), alpha, t, df)
    if test == "permutation":
        diff = float(np.mean(xa) - np.mean(xb))
        p = float(_permutation_p(xa, xb, seed, n_resamples, max_exact))
        if xa.size >= 2 and xb.size >= 2:
            _, ci, _, _, _ = _welch(xa, xb, alpha)
        else:
            ci = (diff, diff)
        return ComparisonResult(diff, ci, p, test, (xa.size, xb.size), alpha)
    raise ValueError(f"unknown test {test!r}; choose welch_t or permutation")


def check_sampling(
    trace: PowerTrace, measured_span: tuple[float, float] | None = None
) -> SamplingAdequacy:
    """Flag sampling overhead, too-short spans and too few samples."""
    start, end = measured_span if measured_span is not None else (trace.start, trace.end)
    ts = trace.timestamps
    inside = int(np.count_nonzero((ts >= start) & (ts <= end)))
    min_interval = diagnose(trace).min_interval
    warnings = []
    if min_interval < MIN_SAMPLE_INTERVAL_S:
        warnings.append(
            f"sampling interval < 0.1 s ({min_interval:g} s): tool overhead may "
            "perturb the measurement"
        )
    if end - start < MIN_SPAN_S:
        warnings.append(
            f"span < 0.1 s ({end - start:g} s): too short to measure reliably"
        )
    if inside < MIN_SAMPLES_IN_WINDOW:
        warnings.append(
            f"only {inside} samples in window (< {MIN_SAMPLES_IN_WINDOW}): transient "
            "spikes may be aliased; repeat the measurement"
        )
    return SamplingAdequacy(inside, min_interval, tuple(warnings))
