"""
Statistics Module
Paired t-tests with Cohen's d, percentile bootstrap intervals, variance
decomposition and the fixed-layout summary table.
"""
import sys
import os
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import math
from dataclasses import asdict, dataclass
from typing import Hashable, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.stats

from config import Config
from modules.errors import StatsInputError


@dataclass
class StatsSummary:
    mean: float
    ci_low: float
    ci_high: float
    p_value: Optional[float]
    cohens_d: Optional[float]
    n_seeds: int
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class VarianceDecomposition:
    v_total: float
    v_env: float
    v_policy: float
    groups: int = 0
    n: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _sample(values: Sequence[float], name: str = "sample") -> np.ndarray:
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise StatsInputError(f"{name} needs at least two values")
    if not np.all(np.isfinite(x)):
        raise StatsInputError(f"{name} contains non-finite values")
    return x


def bootstrap_ci(values: Sequence[float], resamples: int = Config.BOOTSTRAP_RESAMPLES,
                 level: float = Config.CONFIDENCE,
                 rng: Optional[np.random.Generator] = None) -> Tuple[float, float]:
    """
    Percentile bootstrap interval of the mean.

    Args:
        values: Per-seed means
        resamples: Number of bootstrap resamples
        level: Confidence level
        rng: Resampling stream (a fresh Config.STATS_SEED stream when omitted)

    Returns:
        (low, high)
    """
    x = _sample(values)
    mean = float(x.mean())
    if np.all(x == x[0]):
        return mean, mean
    rng = rng if rng is not None else np.random.default_rng(Config.STATS_SEED)
    res = scipy.stats.bootstrap((x,), np.mean, n_resamples=resamples, confidence_level=level,
                                method="percentile", random_state=rng)
    low, high = float(res.confidence_interval.low), float(res.confidence_interval.high)
    # float rounding can put a near-degenerate interval a hair off the mean
    return min(low, mean), max(high, mean)


def paired_t(pre: Sequence[float], post: Sequence[float],
             rng: Optional[np.random.Generator] = None) -> StatsSummary:
    """
    Two-sided paired t-test of post against pre.

    The summary's mean and interval describe `post`; d = mean(diff)/sd(diff)
    with diff = post - pre. Zero-variance differences have no t statistic:
    all-zero differences give d = 0, p = 1, otherwise d is a signed infinity
    and p its exact limit 0.
    """
    before = _sample(pre, "pre")
    after = _sample(post, "post")
    if before.size != after.size:
        raise StatsInputError(f"paired samples differ in length ({before.size} vs {after.size})")
    diff = after - before
    mean_diff = float(diff.mean())
    sd = float(diff.std(ddof=1))
    note = ""
    if sd == 0.0:
        if mean_diff == 0.0:
            d, p = 0.0, 1.0
        else:
            d, p = math.copysign(math.inf, mean_diff), 0.0
            note = "zero-variance differences: p is the exact limit"
    else:
        d = mean_diff / sd
        p = float(scipy.stats.ttest_rel(after, before).pvalue)
    low, high = bootstrap_ci(after, rng=rng)
    return StatsSummary(float(after.mean()), low, high, p, d, int(after.size), note)


def summarize(values: Sequence[float], rng: Optional[np.random.Generator] = None) -> StatsSummary:
    """Mean and bootstrap interval of one sample, no test."""
    x = _sample(values)
    low, high = bootstrap_ci(x, rng=rng)
    return StatsSummary(float(x.mean()), low, high, None, None, int(x.size))


def variance_decomposition(groups: Mapping[Hashable, Sequence[float]]) -> VarianceDecomposition:
    """
    Split reward variance into a between-chance and a within-chance part.

    Args:
        groups: Rewards grouped by chance assignment (each group: chance held fixed)

    Returns:
        v_total = population variance of all rewards,
        v_env = size-weighted variance of the group means,
        v_policy = size-weighted mean of the within-group variances
        (so v_env + v_policy = v_total).
    """
    if not groups:
        raise StatsInputError("no groups to decompose")
    arrays = []
    for name, values in groups.items():
        x = np.asarray(values, dtype=float)
        if x.size < 2:
            raise StatsInputError(f"group {name!r} has fewer than 2 records")
        arrays.append(x)
    everything = np.concatenate(arrays)
    n = everything.size
    grand = everything.mean()
    v_total = float(everything.var())
    v_env = float(sum(x.size * (x.mean() - grand) ** 2 for x in arrays) / n)
    v_policy = float(sum(x.size * x.var() for x in arrays) / n)
    return VarianceDecomposition(max(v_total, 0.0), max(v_env, 0.0), max(v_policy, 0.0), len(arrays), n)


def _fmt(value: Optional[float], spec: str) -> str:
    if value is None:
        return "-"
    if math.isinf(value):
        return "-inf" if value < 0 else "inf"
    return format(value, spec)


def format_p(p: Optional[float]) -> str:
    if p is None:
        return "-"
    return "<0.0001" if p < 1e-4 else f"{p:.4f}"


def format_table(rows: Sequence[Tuple[str, StatsSummary]]) -> str:
    """Fixed-layout table: condition, mean, 95% CI, p, d, n."""
    header = f"{'Condition':<28} {'Mean':>8} {'95% CI':>20} {'p':>9} {'d':>8} {'n':>4}"
    lines = [header, "-" * len(header)]
    for name, s in rows:
        ci = f"[{s.ci_low:+.3f}, {s.ci_high:+.3f}]"
        lines.append(
            f"{name:<28} {s.mean:>+8.3f} {ci:>20} {format_p(s.p_value):>9} {_fmt(s.cohens_d, '+.1f'):>8} {s.n_seeds:>4}"
        )
    return "\n".join(lines)


if __name__ == "__main__":
    pre = np.array([-0.05, -0.04, -0.03, -0.04, -0.05])
    post = np.array([-0.925, -0.927, -0.926, -0.928, -0.924])
    print(format_table([("Kuhn zero contingency", paired_t(pre, post))]))
