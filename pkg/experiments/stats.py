"""Interval estimates, regressions and rank tests for Monte Carlo reports."""
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

CI_LEVEL = 0.95


@dataclass(frozen=True)
class Estimate:
    estimate: float
    ci_low: float
    ci_high: float
    stderr: float
    n: int
    method: str

    def as_dict(self):
        return asdict(self)

    def excludes(self, value):
        return not self.ci_low <= value <= self.ci_high


def mean_estimate(values, level=CI_LEVEL):
    """Sample mean with a Student-t interval; fewer than 2 values give an unbounded interval."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n == 0:
        return Estimate(math.nan, -math.inf, math.inf, math.nan, 0, "t")
    mean = float(values.mean())
    if n < 2:
        return Estimate(mean, -math.inf, math.inf, math.nan, 1, "t")
    se = float(values.std(ddof=1) / math.sqrt(n))
    half = float(stats.t.ppf((1.0 + level) / 2.0, n - 1)) * se
    return Estimate(mean, mean - half, mean + half, se, n, "t")


def proportion_estimate(successes, n, level=CI_LEVEL):
    """Binomial proportion with a Wilson score interval."""
    successes, n = int(successes), int(n)
    if n == 0:
        return Estimate(math.nan, 0.0, 1.0, math.nan, 0, "wilson")
    ci = stats.binomtest(successes, n).proportion_ci(confidence_level=level, method="wilson")
    p = successes / n
    return Estimate(p, float(ci.low), float(ci.high), math.sqrt(p * (1.0 - p) / n), n, "wilson")


def slope_fit(x, y, level=CI_LEVEL):
    """Least-squares slope of y on x with a t interval on n−2 degrees of freedom."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or np.unique(x).size < 2 or not np.all(np.isfinite(y)):
        return None
    fit = stats.linregress(x, y)
    if x.size > 2:
        half = float(stats.t.ppf((1.0 + level) / 2.0, x.size - 2)) * fit.stderr
    else:
        half = math.inf
    return {
        "slope": float(fit.slope),
        "intercept": float(fit.intercept),
        "stderr": float(fit.stderr),
        "ci_low": float(fit.slope - half),
        "ci_high": float(fit.slope + half),
        "rvalue": float(fit.rvalue),
        "n": int(x.size),
    }


def log_slope_fit(x, means, level=CI_LEVEL):
    means = np.asarray(means, dtype=float)
    if means.size == 0 or np.any(~(means > 0)):
        return None
    return slope_fit(x, np.log(means), level)


def one_sided_less(a, b):
    """Mann–Whitney p-value for 'a is stochastically smaller than b'."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if not a.size or not b.size:
        return math.nan
    return float(stats.mannwhitneyu(a, b, alternative="less").pvalue)


def same_distribution(a, b):
    """Two-sample Kolmogorov–Smirnov p-value."""
    return float(stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float)).pvalue)


def relative_change(a, b):
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale
