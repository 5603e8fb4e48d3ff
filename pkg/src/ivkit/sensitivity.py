"""Sensitivity of Anderson-Rubin inference to a direct instrument effect.

The outcome model is widened to ``Y = D beta + X kappa + delta * sigma * Z + e``
with ``delta`` in a user-supplied range.  Under the null the AR statistic is
noncentral F(1, n - p - 1) with noncentrality ``delta^2 Z*'Z*``; taking the
worst case ``Delta = max |delta|`` gives a conservative critical value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dist
from .dataset import IVData, ProjectedData
from .errors import ConfigurationError, UnsupportedError
from .weakiv import TestResult, ar_quadratic_set, ar_statistic


@dataclass(frozen=True)
class SensitivitySpec:
    delta_lo: float
    delta_hi: float
    alpha: float = 0.05

    def __post_init__(self):
        if not self.delta_lo <= self.delta_hi:
            raise ConfigurationError(f"delta range is reversed: ({self.delta_lo}, {self.delta_hi})")
        if not 0 < self.alpha < 1:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha!r}")

    @property
    def delta_max(self) -> float:
        return max(abs(self.delta_lo), abs(self.delta_hi))


def sensitivity_ncp(data: ProjectedData, delta_max: float) -> float:
    return delta_max**2 * float(data.zz[0, 0])


def sens_interval(data: ProjectedData, spec: SensitivitySpec, beta0: float = 0.0) -> TestResult:
    """Worst-case p-value at ``beta0`` and the 1 - alpha sensitivity interval."""
    if data.L != 1:
        raise UnsupportedError("sensitivity analysis supports a single instrument only")
    df2 = data.n - data.p - 1
    ncp = sensitivity_ncp(data, spec.delta_max)
    params = dist.NoncentralFParams(1, df2, ncp)
    crit = dist.ncf_quantile(1.0 - spec.alpha, params)
    stat = ar_statistic(data, beta0)
    p = dist.ncf_sf(stat, params)
    cs = ar_quadratic_set(data, crit, df2)
    return TestResult(stat, p, cs, spec.alpha, "AR-sensitivity", 1, df2, ncp=ncp, beta0=beta0)


def calibrate_delta(data: IVData, covariate: str) -> float:
    """Heuristic delta for a confounder resembling ``covariate``.

    |corr(covariate, Z)| * |coefficient of covariate in OLS of Y on D and X|
    divided by the residual standard error of that regression.
    """
    if data.L != 1:
        raise UnsupportedError("delta calibration needs a single instrument")
    try:
        j = data.covariate_names.index(covariate)
    except ValueError:
        raise ConfigurationError(f"unknown covariate {covariate!r}") from None
    x = data.design()
    design = np.column_stack([x, data.exposure])
    coef, *_ = np.linalg.lstsq(design, data.outcome, rcond=None)
    resid = data.outcome - design @ coef
    sigma = math.sqrt(float(resid @ resid) / (data.n - design.shape[1]))
    kappa_j = coef[int(data.intercept) + j]
    corr = np.corrcoef(data.covariates[:, j], data.instruments[:, 0])[0, 1]
    return abs(corr) * abs(kappa_j) / sigma
