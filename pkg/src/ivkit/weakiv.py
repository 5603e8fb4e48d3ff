"""Weak-instrument-robust tests: Anderson-Rubin and conditional likelihood ratio."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import dist
from .dataset import ProjectedData
from .errors import ConfigurationError, DesignError
from .kclass import liml_k, _denominator


class SetKind(str, Enum):
    EMPTY = "empty"
    INTERVAL = "interval"
    TWO_RAYS = "two_rays"
    WHOLE_LINE = "whole_line"


@dataclass(frozen=True)
class IntervalSet:
    """A closed confidence region on the real line.

    For ``INTERVAL`` the set is [lo, hi]; one endpoint may be infinite when
    the region is a single ray.  For ``TWO_RAYS`` (lo, hi) is the excluded
    middle: the set is (-inf, lo] U [hi, inf).
    """

    kind: SetKind
    lo: float = math.nan
    hi: float = math.nan

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(SetKind.EMPTY)

    @classmethod
    def whole_line(cls) -> "IntervalSet":
        return cls(SetKind.WHOLE_LINE, -math.inf, math.inf)

    def __post_init__(self):
        if self.kind in (SetKind.INTERVAL, SetKind.TWO_RAYS) and not self.lo <= self.hi:
            raise ValueError(f"endpoints out of order: {self.lo} > {self.hi}")

    def __contains__(self, x: float) -> bool:
        if self.kind is SetKind.EMPTY:
            return False
        if self.kind is SetKind.WHOLE_LINE:
            return True
        if self.kind is SetKind.INTERVAL:
            return self.lo <= x <= self.hi
        return x <= self.lo or x >= self.hi

    def __str__(self) -> str:
        if self.kind is SetKind.EMPTY:
            return "empty set"
        if self.kind is SetKind.WHOLE_LINE:
            return "(-Inf, Inf)"
        if self.kind is SetKind.INTERVAL:
            return f"[{_fmt_end(self.lo)}, {_fmt_end(self.hi)}]"
        return f"(-Inf, {_fmt_end(self.lo)}] union [{_fmt_end(self.hi)}, Inf)"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "lo": _json_num(self.lo), "hi": _json_num(self.hi)}

    def bounds(self) -> tuple[float, float]:
        """Lower and upper limits of the set as a (possibly infinite) pair."""
        if self.kind is SetKind.INTERVAL:
            return self.lo, self.hi
        if self.kind is SetKind.EMPTY:
            return math.nan, math.nan
        return -math.inf, math.inf


def _fmt_end(x: float) -> str:
    if math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    return f"{x:.15g}"


def _json_num(x: float):
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "Inf" if x > 0 else "-Inf"
    return x


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    confidence_set: IntervalSet
    alpha: float
    method: str
    df1: float | None = None
    df2: float | None = None
    ncp: float = 0.0
    beta0: float = 0.0

    __test__ = False  # not a pytest class


@dataclass(frozen=True)
class QStats:
    s_hat: np.ndarray
    t_hat: np.ndarray
    q1: float
    q2: float
    q3: float
    sigma_hat: np.ndarray
    beta0: float


def _sigma_hat(data: ProjectedData) -> np.ndarray:
    return data.mRm / data.df_resid


def q_stats(data: ProjectedData, beta0: float) -> QStats:
    """Standardized statistics S, T and the quadratic forms Q1 = S'S, Q2 = S'T, Q3 = T'T."""
    sigma = _sigma_hat(data)
    try:
        sigma_inv = np.linalg.inv(sigma)
    except np.linalg.LinAlgError:
        raise DesignError("reduced-form covariance is singular") from None
    a0 = np.array([beta0, 1.0])
    b0 = np.array([1.0, -beta0])
    sb = float(b0 @ sigma @ b0)
    ta = float(a0 @ sigma_inv @ a0)
    if not (sb > 0 and ta > 0):
        raise DesignError("reduced-form covariance is not positive definite")
    root_inv = data.zz_inv_sqrt()
    zm = np.column_stack([data.zy, data.zd])
    s = root_inv @ zm @ b0 / math.sqrt(sb)
    t = root_inv @ zm @ sigma_inv @ a0 / math.sqrt(ta)
    return QStats(s, t, float(s @ s), float(s @ t), float(t @ t), sigma, beta0)


def clr_statistic(q1: float, q2: float, q3: float) -> float:
    inner = max(q1 * q3 - q2 * q2, 0.0)
    disc = max((q1 + q3) ** 2 - 4.0 * inner, 0.0)
    return 0.5 * (q1 - q3) + 0.5 * math.sqrt(disc)


def _check_alpha(alpha: float):
    if not 0 < alpha < 1:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha!r}")


def ar_statistic(data: ProjectedData, beta0: float) -> float:
    return q_stats(data, beta0).q1 / data.L


def ar_quadratic_set(data: ProjectedData, critical_value: float, df2: float) -> IntervalSet:
    """Closed-form {beta : AR(beta) <= critical_value}.

    AR(beta) = [u'Pu / L] / [u'Ru / df2] with u = Y* - D* beta, so the set is
    where a beta^2 + b beta + c <= 0.
    """
    q = critical_value * data.L / df2
    r = data.mRm
    a = data.dPd - q * r[1, 1]
    b = -2.0 * (data.dPy - q * r[0, 1])
    c = data.yPy - q * r[0, 0]
    scale = max(abs(data.dPd), abs(q * r[1, 1]))

    if abs(a) <= 1e-14 * scale:
        if b == 0:
            return IntervalSet.whole_line() if c <= 0 else IntervalSet.empty()
        root = float(-c / b)
        return IntervalSet(SetKind.INTERVAL, -math.inf, root) if b > 0 else IntervalSet(SetKind.INTERVAL, root, math.inf)

    disc = b * b - 4.0 * a * c
    if disc < 0:
        return IntervalSet.empty() if a > 0 else IntervalSet.whole_line()
    qq = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    roots = sorted([qq / a, c / qq] if qq != 0 else [0.0, 0.0])
    kind = SetKind.INTERVAL if a > 0 else SetKind.TWO_RAYS
    return IntervalSet(kind, float(roots[0]), float(roots[1]))


def ar_test(data: ProjectedData, beta0: float = 0.0, alpha: float = 0.05, reference: str = "f") -> TestResult:
    """Anderson-Rubin test of beta = beta0 and its inverted confidence set.

    ``reference="f"`` uses F(L, n - L - p); ``"chisq"`` uses chi2(L) / L.
    """
    _check_alpha(alpha)
    L, df2 = data.L, data.df_resid
    stat = ar_statistic(data, beta0)
    if reference == "f":
        p = dist.f_sf(stat, L, df2)
        crit = dist.f_quantile(1.0 - alpha, L, df2)
    elif reference == "chisq":
        p = dist.chisq_sf(stat * L, L)
        crit = dist.chisq_quantile(1.0 - alpha, L) / L
    else:
        raise ConfigurationError(f"unknown AR reference distribution {reference!r}")
    cs = ar_quadratic_set(data, crit, df2)
    return TestResult(stat, p, cs, alpha, "AR", L, df2 if reference == "f" else math.inf, beta0=beta0)


class _CLRNull:
    """Conditional null law of the CLR statistic given Q3.

    With one instrument CLR equals Q1 and the law is the AR reference
    exactly.  Otherwise a fixed set of standard normal draws s is reused:
    Q1 = s's and Q2 = sqrt(q3) s_1.
    """

    def __init__(self, data: ProjectedData, mc_draws: int, seed: int):
        self.L = data.L
        self.df2 = data.df_resid
        if self.L > 1:
            rng = np.random.default_rng(seed)
            s = rng.standard_normal((mc_draws, self.L))
            self.sim_q1 = np.einsum("ij,ij->i", s, s)
            self.sim_s1sq = s[:, 0] ** 2

    def sf(self, stat: float, q3: float) -> float:
        if self.L == 1:
            return dist.f_sf(stat, 1, self.df2)
        q1 = self.sim_q1
        inner = np.maximum(q3 * (q1 - self.sim_s1sq), 0.0)
        sim = 0.5 * (q1 - q3) + 0.5 * np.sqrt(np.maximum((q1 + q3) ** 2 - 4.0 * inner, 0.0))
        return float(np.mean(sim >= stat))


def clr_test(
    data: ProjectedData,
    beta0: float = 0.0,
    alpha: float = 0.05,
    mc_draws: int = 100_000,
    seed: int = 42,
    tol: float = 1e-8,
) -> TestResult:
    """Conditional likelihood ratio test and its confidence set.

    The confidence set is found by expanding a bracket around the LIML
    estimate until the test rejects on each side, then bisecting each
    boundary to ``tol``.  A side that never rejects is reported as a ray.
    """
    _check_alpha(alpha)
    if mc_draws < 1000:
        raise ConfigurationError("mc_draws must be at least 1000")
    null = _CLRNull(data, mc_draws, seed)

    def pval(b: float) -> float:
        q = q_stats(data, b)
        return null.sf(clr_statistic(q.q1, q.q2, q.q3), q.q3)

    q = q_stats(data, beta0)
    stat = clr_statistic(q.q1, q.q2, q.q3)
    p0 = null.sf(stat, q.q3)

    den, num = _denominator(data, liml_k(data))
    center = num / den
    cs = _scan_set(pval, center, alpha, tol)
    return TestResult(stat, p0, cs, alpha, "CLR", data.L, data.df_resid, beta0=beta0)


def _scan_set(pval, center: float, alpha: float, tol: float) -> IntervalSet:
    if pval(center) < alpha:
        return IntervalSet.empty()
    limit = 1e6 * (1.0 + abs(center))
    step0 = 0.01 * max(abs(center), 1e-3)

    def boundary(direction: float) -> float:
        inside, step = center, step0
        while True:
            probe = center + direction * step
            if abs(probe - center) > limit:
                return direction * math.inf
            if pval(probe) < alpha:
                break
            inside, step = probe, step * 2.0
        lo, hi = sorted((inside, probe))
        # keep the accepted end of the bracket on the center side
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            accepted = pval(mid) >= alpha
            if (direction > 0) == accepted:
                lo = mid
            else:
                hi = mid
        return lo if direction > 0 else hi

    lo, hi = boundary(-1.0), boundary(1.0)
    if math.isinf(lo) and math.isinf(hi):
        return IntervalSet.whole_line()
    return IntervalSet(SetKind.INTERVAL, lo, hi)
