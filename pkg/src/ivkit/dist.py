"""CDFs, survival functions and quantiles used throughout ivkit.

The regularized incomplete beta/gamma functions and the normal integral come
from :mod:`scipy.special`.  The noncentral F distribution is evaluated here as
a Poisson mixture of incomplete beta terms, and all quantiles are computed by
a bracketed, safeguarded Newton iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError

POISSON_TAIL_TOL = 1e-13
MAX_TERMS = 100_000


def _check_prob(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must lie strictly between 0 and 1, got {p!r}")


def _check_df(*dfs: float) -> None:
    for df in dfs:
        if not (df > 0 and math.isfinite(df)) and df != math.inf:
            raise DomainError(f"degrees of freedom must be positive, got {df!r}")


def _solve_quantile(
    cdf: Callable[[float], float],
    p: float,
    lo: float,
    hi: float,
    pdf: Callable[[float], float] | None = None,
    xtol: float = 1e-14,
    max_iter: int = 400,
) -> float:
    """Find x in [lo, hi] with cdf(x) = p.

    ``hi`` is expanded geometrically until it brackets the root (``lo`` is
    assumed valid).  Newton steps are taken when a density is supplied and
    the step stays inside the bracket; otherwise the bracket is bisected.
    """
    for _ in range(2000):
        if cdf(hi) >= p:
            break
        lo, hi = hi, (hi * 2.0 if hi > 0 else 1.0)
    else:  # pragma: no cover
        raise ConvergenceError("could not bracket quantile")

    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = cdf(x) - p
        if fx == 0.0:
            return x
        if fx < 0:
            lo = x
        else:
            hi = x
        if hi - lo <= xtol * max(1.0, abs(x)):
            return 0.5 * (lo + hi)
        step_ok = False
        if pdf is not None:
            dens = pdf(x)
            if dens > 0 and math.isfinite(dens):
                nx = x - fx / dens
                if lo < nx < hi:
                    if abs(nx - x) <= xtol * max(1.0, abs(x)):
                        return nx
                    x, step_ok = nx, True
        if not step_ok:
            x = 0.5 * (lo + hi)
    return x


# -- normal --------------------------------------------------------------


def normal_cdf(x: float) -> float:
    return float(special.ndtr(x))


def normal_sf(x: float) -> float:
    return float(special.ndtr(-x))


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def normal_quantile(p: float) -> float:
    _check_prob(p)
    x = float(special.ndtri(p))
    # one Newton polish
    return x - (normal_cdf(x) - p) / normal_pdf(x)


# -- chi-square ----------------------------------------------------------


def chisq_cdf(x: float, df: float) -> float:
    _check_df(df)
    if x <= 0:
        return 0.0
    return float(special.gammainc(df / 2.0, x / 2.0))


def chisq_sf(x: float, df: float) -> float:
    _check_df(df)
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


def chisq_pdf(x: float, df: float) -> float:
    if x <= 0:
        return 0.0
    k = df / 2.0
    return math.exp((k - 1) * math.log(x) - x / 2.0 - k * math.log(2.0) - special.gammaln(k))


def chisq_quantile(p: float, df: float) -> float:
    _check_prob(p)
    _check_df(df)
    return _solve_quantile(lambda x: chisq_cdf(x, df), p, 0.0, max(df, 1.0), lambda x: chisq_pdf(x, df))


# -- Student t -----------------------------------------------------------


def t_cdf(x: float, df: float) -> float:
    _check_df(df)
    if df == math.inf:
        return normal_cdf(x)
    tail = 0.5 * float(special.betainc(df / 2.0, 0.5, df / (df + x * x)))
    return 1.0 - tail if x > 0 else tail


def t_sf(x: float, df: float) -> float:
    return t_cdf(-x, df)


def t_pdf(x: float, df: float) -> float:
    if df == math.inf:
        return normal_pdf(x)
    logc = special.gammaln((df + 1) / 2) - special.gammaln(df / 2) - 0.5 * math.log(df * math.pi)
    return math.exp(logc - (df + 1) / 2 * math.log1p(x * x / df))


def t_quantile(p: float, df: float) -> float:
    _check_prob(p)
    _check_df(df)
    if p == 0.5:
        return 0.0
    if p < 0.5:
        return -t_quantile(1.0 - p, df)
    return _solve_quantile(lambda x: t_cdf(x, df), p, 0.0, 2.0, lambda x: t_pdf(x, df))


# -- central F -----------------------------------------------------------


def _beta_arg(x: float, df1: float, df2: float) -> tuple[float, float]:
    """Return (y, 1 - y) with y = x d1 / (x d1 + d2), both computed without cancellation."""
    num = x * df1
    den = num + df2
    return num / den, df2 / den


def f_cdf(x: float, df1: float, df2: float) -> float:
    _check_df(df1, df2)
    if x <= 0:
        return 0.0
    if x == math.inf:
        return 1.0
    if df2 == math.inf:
        return chisq_cdf(x * df1, df1)
    y, _ = _beta_arg(x, df1, df2)
    return float(special.betainc(df1 / 2.0, df2 / 2.0, y))


def f_sf(x: float, df1: float, df2: float) -> float:
    _check_df(df1, df2)
    if x <= 0:
        return 1.0
    if x == math.inf:
        return 0.0
    if df2 == math.inf:
        return chisq_sf(x * df1, df1)
    _, yc = _beta_arg(x, df1, df2)
    return float(special.betainc(df2 / 2.0, df1 / 2.0, yc))


def f_pdf(x: float, df1: float, df2: float) -> float:
    if x <= 0:
        return 0.0
    a, b = df1 / 2.0, df2 / 2.0
    logpdf = (
        a * math.log(df1 / df2) + (a - 1) * math.log(x)
        - (a + b) * math.log1p(df1 * x / df2) - special.betaln(a, b)
    )
    return math.exp(logpdf)


def f_quantile(p: float, df1: float, df2: float) -> float:
    _check_prob(p)
    _check_df(df1, df2)
    return _solve_quantile(lambda x: f_cdf(x, df1, df2), p, 0.0, 4.0, lambda x: f_pdf(x, df1, df2))


# -- noncentral F --------------------------------------------------------


@dataclass(frozen=True)
class NoncentralFParams:
    df1: float
    df2: float
    ncp: float = 0.0

    def __post_init__(self):
        _check_df(self.df1, self.df2)
        if not (self.ncp >= 0 and math.isfinite(self.ncp)):
            raise DomainError(f"noncentrality must be a finite nonnegative number, got {self.ncp!r}")


def _poisson_window(mu: float, tol: float, max_terms: int) -> tuple[int, np.ndarray]:
    """Poisson(mu) weights around the mode covering all but ``tol`` of the mass.

    Returns the first index and the weight vector.
    """
    mode = int(math.floor(mu))
    w_mode = math.exp(-mu + mode * math.log(mu) - special.gammaln(mode + 1)) if mu > 0 else 1.0
    if mu == 0:
        return 0, np.array([1.0])
    lower: list[float] = []
    upper: list[float] = []
    total = w_mode
    w_lo = w_hi = w_mode
    j_lo = j_hi = mode
    while 1.0 - total > tol:
        if len(lower) + len(upper) + 1 > max_terms:
            raise ConvergenceError(
                f"noncentral F series needs more than {max_terms} terms (ncp={2 * mu:g})"
            )
        next_lo = w_lo * j_lo / mu if j_lo > 0 else 0.0
        next_hi = w_hi * mu / (j_hi + 1)
        if next_lo >= next_hi and j_lo > 0:
            j_lo -= 1
            w_lo = next_lo
            lower.append(w_lo)
            total += w_lo
        else:
            j_hi += 1
            w_hi = next_hi
            upper.append(w_hi)
            total += w_hi
        if max(next_lo, next_hi) < tol * 1e-4:
            # remaining weights are negligible; 1 - total is round-off
            break
    weights = np.array(lower[::-1] + [w_mode] + upper)
    return j_lo, weights


def _ncf_terms(x: float, params: NoncentralFParams, upper: bool, max_terms: int) -> float:
    d1, d2, lam = params.df1, params.df2, params.ncp
    y, yc = _beta_arg(x, d1, d2)
    start, w = _poisson_window(lam / 2.0, POISSON_TAIL_TOL, max_terms)
    j = np.arange(start, start + w.size)
    if upper:
        terms = special.betainc(d2 / 2.0, d1 / 2.0 + j, yc)
    else:
        terms = special.betainc(d1 / 2.0 + j, d2 / 2.0, y)
    return float(np.clip(np.dot(w, terms), 0.0, 1.0))


def ncf_cdf(x: float, params: NoncentralFParams, max_terms: int = MAX_TERMS) -> float:
    """P(F <= x) for F ~ F(df1, df2, ncp)."""
    if x <= 0:
        return 0.0
    if x == math.inf:
        return 1.0
    if params.ncp == 0:
        return f_cdf(x, params.df1, params.df2)
    return _ncf_terms(x, params, upper=False, max_terms=max_terms)


def ncf_sf(x: float, params: NoncentralFParams, max_terms: int = MAX_TERMS) -> float:
    """P(F > x) for F ~ F(df1, df2, ncp)."""
    if x <= 0:
        return 1.0
    if x == math.inf:
        return 0.0
    if params.ncp == 0:
        return f_sf(x, params.df1, params.df2)
    return _ncf_terms(x, params, upper=True, max_terms=max_terms)


def ncf_quantile(p: float, params: NoncentralFParams, max_terms: int = MAX_TERMS) -> float:
    """Quantile of the noncentral F, bracketed below by the central quantile."""
    _check_prob(p)
    lo = f_quantile(p, params.df1, params.df2)
    if params.ncp == 0:
        return lo
    # mean-based upper start; _solve_quantile doubles it if needed
    hi = max(2 * lo, (1.0 + params.ncp / params.df1) * lo * 1.5)
    return _solve_quantile(lambda x: ncf_cdf(x, params, max_terms), p, lo, hi, xtol=1e-13)
