"""Small statistics helpers: Student-t tail, paired t-test, log-log fits."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import betainc

from .errors import DegenerateVariance, InvalidParams


def student_t_sf(t: float, df: float) -> float:
    """Upper tail ``P(T >= t)`` of Student's t with ``df`` degrees of freedom.

    Uses ``P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)``.
    """
    if not df > 0:
        raise InvalidParams(f"degrees of freedom must be positive, got {df}")
    if t == 0:
        return 0.5
    tail = 0.5 * float(betainc(0.5 * df, 0.5, df / (df + t * t)))
    return tail if t > 0 else 1.0 - tail


def paired_t_test(d, one_sided: bool = True) -> tuple[float, float]:
    """t statistic and p-value for the mean of paired differences ``d``.

    One-sided tests the alternative ``mean(d) > 0``; otherwise two-sided.
    """
    d = np.asarray(d, dtype=float)
    n = d.size
    if n < 2:
        raise InvalidParams("paired t-test needs at least two pairs")
    sd = float(np.std(d, ddof=1))
    if sd == 0.0:
        raise DegenerateVariance("all paired differences are identical")
    t = float(np.mean(d)) / (sd / math.sqrt(n))
    upper = student_t_sf(t, n - 1)
    if one_sided:
        return t, upper
    return t, 2.0 * min(upper, 1.0 - upper)


def fit_loglog(x, y) -> tuple[float, float]:
    """Least-squares slope and intercept of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(y) & (y > 0)
    if ok.sum() < 2:
        return math.nan, math.nan
    slope, intercept = np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)
    return float(slope), float(intercept)
