"""Log-likelihood-ratio test for feedback-driven posting.

The alternative lets the follower weights a roam the simplex; the null pins
a = 0 and a_u = 1 (posting driven by own taste alone), with x free in both.
Both are fitted by the softmax MLE under one shared temperature, and
2 * (loglik_alt - loglik_null) is referred to a chi-squared tail per Wilks.
The default degrees of freedom equal the follower count (the weight simplex
the alternative frees); this boundary-constrained setting makes the
chi-squared reference conservative, so calibration is checked by simulation
rather than assumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimation import EstimationConfig, EstimationResult, fit_mle, fit_mle_null
from .eventlog import FeedbackLog

DEFAULT_LEVELS = (0.01, 0.05, 0.1)
_EPS = 1e-15
_MAX_ITER = 10000


class UntestableLogError(ValueError):
    """The log cannot support the test; `reason` says why."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _lower_series(a: float, z: float) -> float:
    """Regularized lower incomplete gamma P(a, z) by power series (z < a + 1)."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= z / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-z + a * math.log(z) - math.lgamma(a))


def _upper_cf(a: float, z: float) -> float:
    """Regularized upper incomplete gamma Q(a, z) by continued fraction (z >= a + 1)."""
    tiny = 1e-300
    b = z + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-z + a * math.log(z) - math.lgamma(a))


def chi2_survival(x: float, dof: int) -> float:
    """Upper-tail probability of the chi-squared distribution."""
    if not isinstance(dof, (int, np.integer)) or dof < 1:
        raise ValueError("dof must be an integer >= 1")
    x = float(x)
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 1.0
    a, z = dof / 2.0, x / 2.0
    if z < a + 1.0:
        return min(max(1.0 - _lower_series(a, z), 0.0), 1.0)
    return min(max(_upper_cf(a, z), 0.0), 1.0)


@dataclass(frozen=True)
class TestReport:
    user: str
    llr: float
    dof: int
    p_value: float
    reject_at: dict[float, bool]
    fit_alt: EstimationResult
    fit_null: EstimationResult

    def to_dict(self) -> dict:
        return {
            "user": self.user,
            "llr": self.llr,
            "dof": self.dof,
            "p_value": self.p_value,
            "verdicts": {str(level): bool(flag) for level, flag in self.reject_at.items()},
        }


@dataclass(frozen=True)
class CohortSummary:
    total: int
    rejected: dict[float, int]
    fraction: dict[float, float]

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "rejected": {str(level): count for level, count in self.rejected.items()},
            "fraction": {str(level): frac for level, frac in self.fraction.items()},
        }


def llr_statistic(
    log: FeedbackLog,
    cfg: EstimationConfig,
    dof: int | None = None,
    user: str = "user",
    levels=DEFAULT_LEVELS,
    rng=None,
) -> TestReport:
    """Fit alternative and null, return the LLR report with Wilks p-value."""
    posts = log.own_posts
    if len(posts) < 2:
        raise UntestableLogError("need at least 2 own posts")
    if len({e.topic for e in posts}) < 2:
        raise UntestableLogError("need own posts in at least 2 distinct topics")
    fit_null = fit_mle_null(log, cfg)
    null_start = (np.zeros(log.n_followers), 1.0, fit_null.x_hat)
    fit_alt = fit_mle(log, cfg, rng=rng, extra_starts=[null_start])
    llr = fit_alt.objective - fit_null.objective
    dof = int(dof) if dof is not None else log.n_followers
    p_value = chi2_survival(max(2.0 * llr, 0.0), dof)
    reject = {float(level): bool(p_value < level) for level in levels}
    return TestReport(user, float(llr), dof, float(p_value), reject, fit_alt, fit_null)


def cohort_summary(reports, levels=DEFAULT_LEVELS) -> CohortSummary:
    """Count rejections per significance level across users."""
    reports = list(reports)
    if not reports:
        raise ValueError("need at least one report")
    rejected = {}
    for level in levels:
        rejected[float(level)] = sum(1 for r in reports if r.p_value < level)
    total = len(reports)
    fraction = {level: count / total for level, count in rejected.items()}
    return CohortSummary(total, rejected, fraction)
