"""Analytic power and minimum sample size for TSLS, AR and AR-sensitivity tests.

All three formulas are driven by per-observation design moments
(:class:`PowerDesign`), so a design estimated on n observations can be
evaluated at any other sample size m by scaling the signal linearly in m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import dist
from .dataset import ProjectedData
from .errors import ConfigurationError, DomainError, SearchLimitError, UnsupportedError
from .kclass import first_stage, fit_k

MAX_SAMPLE_SIZE = 10**9


class PowerMethod(str, Enum):
    TSLS = "tsls"
    AR = "ar"
    AR_SENS = "ar_sens"

    @classmethod
    def parse(cls, value: "PowerMethod | str") -> "PowerMethod":
        if isinstance(value, cls):
            return value
        key = value.lower().replace("-", "_")
        if key == "arsens":
            key = "ar_sens"
        try:
            return cls(key)
        except ValueError:
            raise ConfigurationError(f"unknown power method {value!r}") from None


@dataclass(frozen=True)
class PowerDesign:
    """Model parameters entering the power formulas.

    sigma, omega, rho
        Structural and first-stage error SDs and their correlation.
    gamma
        First-stage coefficient (single instrument) or vector.
    z_var
        Per-observation second moment of the residualized instrument(s),
        so that Z*'Z* at sample size m is ``m * z_var``.
    var_d, rho_zd
        Variance of D* and correlation of Z* with D* (TSLS formula).
    p, L
        Covariate count (intercept included) and instrument count.
    """

    sigma: float
    omega: float
    rho: float
    gamma: np.ndarray
    z_var: np.ndarray
    var_d: float
    rho_zd: float
    p: int = 0
    L: int = 1

    def __post_init__(self):
        object.__setattr__(self, "gamma", np.atleast_1d(np.asarray(self.gamma, dtype=float)))
        object.__setattr__(self, "z_var", np.atleast_2d(np.asarray(self.z_var, dtype=float)))
        if not (self.sigma > 0 and self.omega > 0):
            raise DomainError("sigma and omega must be positive")
        if not abs(self.rho) < 1:
            raise DomainError(f"|rho| must be below 1, got {self.rho!r}")
        if not abs(self.rho_zd) < 1:
            raise DomainError(f"|rho_zd| must be below 1, got {self.rho_zd!r}")
        if self.gamma.shape[0] != self.L or self.z_var.shape != (self.L, self.L):
            raise DomainError("gamma / z_var dimensions do not match L")

    @property
    def concentration_per_obs(self) -> float:
        return float(self.gamma @ self.z_var @ self.gamma)

    @classmethod
    def from_data(cls, data: ProjectedData) -> "PowerDesign":
        """Plug-in estimates from a fitted design.

        sigma and omega are root mean squares of the TSLS structural and
        first-stage residuals on n - p degrees of freedom, rho is their sample
        correlation, and second moments of Z* and D* use the n - 1 divisor.
        """
        n, p = data.n, data.p
        tsls = fit_k(data, 1.0)
        fs = first_stage(data, tsls)
        eta = data.d_star - data.z_star @ fs.gamma_hat
        eps = tsls.residuals
        z = data.z_star
        z_var = np.atleast_2d(np.cov(z, rowvar=False))
        var_d = float(np.var(data.d_star, ddof=1))
        rho_zd = float(np.corrcoef(z[:, 0], data.d_star)[0, 1]) if data.L == 1 else 0.0
        return cls(
            sigma=math.sqrt(float(eps @ eps) / (n - p)),
            omega=math.sqrt(float(eta @ eta) / (n - p)),
            rho=fs.rho_hat,
            gamma=fs.gamma_hat,
            z_var=z_var,
            var_d=var_d,
            rho_zd=rho_zd,
            p=p,
            L=data.L,
        )


@dataclass(frozen=True)
class PowerSpec:
    lam: float
    n: int
    design: PowerDesign
    method: PowerMethod = PowerMethod.TSLS
    alpha: float = 0.05
    delta_max: float = 0.0
    least_favorable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "method", PowerMethod.parse(self.method))
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if self.delta_max < 0:
            raise DomainError("delta_max must be nonnegative")


def _alt_variance(design: PowerDesign, lam: float) -> float:
    s, w, r = design.sigma, design.omega, design.rho
    v = s * s + 2.0 * r * s * w * lam + w * w * lam * lam
    if not v > 0:
        raise DomainError("sigma^2 + 2 rho sigma omega lambda + omega^2 lambda^2 must be positive")
    return v


def _check_n(n: int, design: PowerDesign, extra: int) -> int:
    df2 = n - design.p - extra
    if df2 < 1:
        raise DomainError(f"sample size {n} leaves no residual degrees of freedom")
    return df2


def power_tsls(lam: float, n: int, design: PowerDesign, alpha: float = 0.05) -> float:
    """Power of the two-sided normal-approximation TSLS test."""
    if design.L != 1:
        raise UnsupportedError("the TSLS power formula assumes a single instrument")
    if n <= 0:
        raise DomainError("sample size must be positive")
    z = dist.normal_quantile(1.0 - alpha / 2.0)
    shift = lam * design.rho_zd * math.sqrt(n * design.var_d) / design.sigma
    return 1.0 + dist.normal_cdf(-z - shift) - dist.normal_cdf(z - shift)


def power_ar(lam: float, n: int, design: PowerDesign, alpha: float = 0.05) -> float:
    """Power of the AR test: noncentral F(1, n - p - L) tail beyond the central critical value."""
    df2 = _check_n(n, design, design.L)
    ncp = n * design.concentration_per_obs * lam * lam / _alt_variance(design, lam)
    crit = dist.f_quantile(1.0 - alpha, 1, df2)
    return dist.ncf_sf(crit, dist.NoncentralFParams(1, df2, ncp))


def power_ar_sens(
    lam: float,
    n: int,
    design: PowerDesign,
    delta_max: float,
    alpha: float = 0.05,
    least_favorable: bool = True,
) -> float:
    """Power of the AR sensitivity test against the alternative ``lam``.

    The critical value is the noncentral F quantile at ncp ``Delta^2 Z*'Z*``.
    With ``least_favorable`` (default) the alternative is also evaluated at
    the direct effect in [-Delta, Delta] that most shrinks the signal, i.e.
    ncp ``Z*'Z* (|lam gamma| - Delta sigma)_+^2 / v``; otherwise the valid
    instrument alternative ``lam^2 gamma^2 Z*'Z* / v`` is used.
    """
    if design.L != 1:
        raise UnsupportedError("sensitivity power supports a single instrument only")
    df2 = _check_n(n, design, 1)
    zz = n * float(design.z_var[0, 0])
    signal = abs(lam * float(design.gamma[0]))
    if least_favorable:
        signal = max(signal - delta_max * design.sigma, 0.0)
    ncp_alt = zz * signal * signal / _alt_variance(design, lam)
    crit = dist.ncf_quantile(1.0 - alpha, dist.NoncentralFParams(1, df2, delta_max**2 * zz))
    return dist.ncf_sf(crit, dist.NoncentralFParams(1, df2, ncp_alt))


def power(spec: PowerSpec) -> float:
    if spec.method is PowerMethod.TSLS:
        return power_tsls(spec.lam, spec.n, spec.design, spec.alpha)
    if spec.method is PowerMethod.AR:
        return power_ar(spec.lam, spec.n, spec.design, spec.alpha)
    return power_ar_sens(spec.lam, spec.n, spec.design, spec.delta_max, spec.alpha, spec.least_favorable)


def min_sample_size(spec: PowerSpec, target_power: float, limit: int = MAX_SAMPLE_SIZE) -> int:
    """Smallest n whose power reaches ``target_power``.

    Geometric bracket expansion followed by integer bisection; the result
    satisfies power(n) >= target and power(n - 1) < target.
    """
    if not 0 < target_power < 1:
        raise DomainError("target power must lie in (0, 1)")
    if not target_power > spec.alpha:
        raise DomainError("target power must exceed alpha")

    def pw(m: int) -> float:
        return power(replace(spec, n=m))

    extra = spec.design.L if spec.method is PowerMethod.AR else 1
    lo = spec.design.p + extra  # largest n with no residual df
    hi = lo + 1
    if spec.method is PowerMethod.TSLS:
        lo, hi = 0, 1
    while pw(hi) < target_power:
        lo, hi = hi, 2 * hi
        if hi > limit:
            if pw(limit) >= target_power:
                hi = limit
                break
            raise SearchLimitError(f"power {target_power} not reached below n = {limit}")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pw(mid) >= target_power:
            hi = mid
        else:
            lo = mid
    return hi
