"""Confidence intervals, two-sample tests and scaling fits used by the checks."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats as _st


def hoeffding_halfwidth(trials: int, alpha: float = 0.01, width: float = 1.0) -> float:
    """Two-sided Hoeffding half-width for the mean of ``trials`` values in an interval of ``width``."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return width * math.sqrt(math.log(2.0 / alpha) / (2.0 * trials))


def normal_ci(samples, level: float = 0.99) -> tuple[float, float, float]:
    """(mean, low, high) using the normal approximation with sample std."""
    x = np.asarray(samples, dtype=np.float64)
    mean = float(x.mean())
    if x.size < 2:
        return mean, mean, mean
    z = _st.norm.ppf(0.5 + level / 2.0)
    half = z * float(x.std(ddof=1)) / math.sqrt(x.size)
    return mean, mean - half, mean + half


def ks_two_sample(a, b) -> float:
    """p-value of the two-sample Kolmogorov-Smirnov test."""
    return float(_st.ks_2samp(np.asarray(a), np.asarray(b)).pvalue)


def two_proportion_pvalue(k1: int, n1: int, k2: int, n2: int) -> float:
    """Two-sided z-test for equality of two binomial proportions."""
    p = (k1 + k2) / (n1 + n2)
    if p in (0.0, 1.0):
        return 1.0
    se = math.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))
    z = (k1 / n1 - k2 / n2) / se
    return float(2 * _st.norm.sf(abs(z)))


def loglog_slope(x, y, base: float = 2.0) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx = np.log(np.asarray(x, dtype=np.float64)) / math.log(base)
    ly = np.log(np.asarray(y, dtype=np.float64)) / math.log(base)
    return float(np.polyfit(lx, ly, 1)[0])


def threshold_classifier_error(a, b) -> tuple[float, float]:
    """Best balanced error of a one-sided threshold rule "a is large, b is small".

    Returns (error, threshold).
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    cands = np.concatenate([a, b, [np.inf]])
    # rule: say "a" when statistic >= thr
    miss_a = np.searchsorted(a, cands, side="left") / a.size
    false_b = 1.0 - np.searchsorted(b, cands, side="left") / b.size
    err = (miss_a + false_b) / 2.0
    i = int(np.argmin(err))
    return float(err[i]), float(cands[i])
