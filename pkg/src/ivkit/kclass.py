"""k-class estimation and Wald inference for a single endogenous regressor.

    beta_k = [D*'(I - k R_Z*) D*]^{-1} D*'(I - k R_Z*) Y*

k = 0 is OLS, k = 1 is TSLS, k = k_LIML is LIML and k_LIML - b/(n - L - p)
is Fuller's estimator.  All quantities are computed from the cross-products
cached on :class:`~ivkit.dataset.ProjectedData`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import dist
from .dataset import ProjectedData
from .errors import ConfigurationError, DegenerateEstimatorError, DesignError, UnsupportedError


class ErrorModel(str, Enum):
    HOMOSKEDASTIC = "homoskedastic"
    HC = "hc"
    CLUSTER = "cluster"

    @classmethod
    def parse(cls, value: "ErrorModel | str") -> "ErrorModel":
        if isinstance(value, cls):
            return value
        aliases = {"homo": cls.HOMOSKEDASTIC, "hc0": cls.HC}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ConfigurationError(f"unknown error model {value!r}") from None


@dataclass(frozen=True, eq=False)
class KClassFit:
    """A fitted k-class estimator.

    ``variance`` is the variance of ``beta_hat`` under ``error_model``;
    ``residuals`` are the structural residuals Y* - D* beta_hat.
    """

    k: float
    beta_hat: float
    kappa_hat: np.ndarray
    sigma_hat_sq: float
    variance: float
    error_model: ErrorModel
    df_t: int
    residuals: np.ndarray = field(repr=False)
    label: str = ""

    @property
    def se(self) -> float:
        return math.sqrt(self.variance)

    def t_stat(self, beta0: float = 0.0) -> float:
        return (self.beta_hat - beta0) / self.se

    def p_value(self, beta0: float = 0.0, reference: str = "t") -> float:
        """Two-sided p-value against a t(n - L - p) or standard normal reference."""
        t = abs(self.t_stat(beta0))
        if reference == "normal":
            return 2.0 * dist.normal_sf(t)
        return 2.0 * dist.t_sf(t, self.df_t)

    def confint(self, alpha: float = 0.05, reference: str = "t") -> tuple[float, float]:
        if reference == "normal":
            q = dist.normal_quantile(1.0 - alpha / 2.0)
        else:
            q = dist.t_quantile(1.0 - alpha / 2.0, self.df_t)
        return self.beta_hat - q * self.se, self.beta_hat + q * self.se


@dataclass(frozen=True)
class FirstStageFit:
    """Regression of D* on Z* and the instrument-strength F test."""

    gamma_hat: np.ndarray
    kappa_tilde_hat: np.ndarray
    f_stat: float
    df1: int
    df2: int
    p_value: float
    r_squared: float
    adj_r_squared: float
    resid_se: float
    resid_df: int
    omega_hat_sq: float
    rho_hat: float


def _denominator(data: ProjectedData, k: float) -> tuple[float, float]:
    den = (1.0 - k) * data.dd + k * data.dPd
    num = (1.0 - k) * data.dy + k * data.dPy
    return den, num


def _covariate_coefficients(data: ProjectedData, target: np.ndarray) -> np.ndarray:
    x = data.source.design()
    if x.shape[1] == 0:
        return np.zeros(0)
    coef, *_ = np.linalg.lstsq(x, target, rcond=None)
    return coef


def fit_k(
    data: ProjectedData,
    k: float,
    error_model: ErrorModel | str = ErrorModel.HOMOSKEDASTIC,
    cluster_ids: np.ndarray | None = None,
    label: str = "",
) -> KClassFit:
    """Fit the k-class estimator for a given ``k``.

    The residual variance uses n - p - 1 in the denominator; the t reference
    for tests and intervals uses n - L - p degrees of freedom.  Robust error
    models are available only for k = 1.
    """
    error_model = ErrorModel.parse(error_model)
    if k < 0 or not math.isfinite(k):
        raise ConfigurationError(f"k must be a finite nonnegative number, got {k!r}")
    den, num = _denominator(data, k)
    if not den > 1e-14 * data.dd:
        raise DegenerateEstimatorError(
            f"D*'(I - k R_Z*)D* = {den:.3g} is not positive for k = {k:g}"
        )
    beta = num / den
    resid = data.y_star - data.d_star * beta
    resid.flags.writeable = False
    sigma_sq = float(resid @ resid) / (data.n - data.p - 1)
    kappa = _covariate_coefficients(data, data.source.outcome - data.source.exposure * beta)

    fit = KClassFit(
        k=float(k), beta_hat=float(beta), kappa_hat=kappa, sigma_hat_sq=sigma_sq,
        variance=sigma_sq / den, error_model=ErrorModel.HOMOSKEDASTIC,
        df_t=data.df_resid, residuals=resid, label=label,
    )
    if error_model is ErrorModel.HOMOSKEDASTIC:
        return fit
    var = robust_variance(data, fit, error_model, cluster_ids)
    return KClassFit(
        k=fit.k, beta_hat=fit.beta_hat, kappa_hat=kappa, sigma_hat_sq=sigma_sq,
        variance=var, error_model=error_model, df_t=fit.df_t, residuals=resid, label=label,
    )


def robust_variance(
    data: ProjectedData,
    fit: KClassFit,
    model: ErrorModel | str,
    cluster_ids: np.ndarray | None = None,
    small_sample: bool = True,
) -> float:
    """Heteroskedasticity- (HC0) or cluster-robust variance of the TSLS slope.

    Sandwich with bread (D_hat' D_hat)^{-1}, D_hat = P_Z* D*.  The cluster
    meat is scaled by C / (C - 1) unless ``small_sample`` is False.
    """
    model = ErrorModel.parse(model)
    if model is ErrorModel.HOMOSKEDASTIC:
        raise ConfigurationError("robust_variance needs the 'hc' or 'cluster' error model")
    if abs(fit.k - 1.0) > 1e-12:
        raise UnsupportedError("robust variance is only available for k = 1 (TSLS)")
    d_hat = data.project_z(data.d_star)
    score = d_hat * fit.residuals
    bread = 1.0 / data.dPd

    if model is ErrorModel.HC:
        meat = float(score @ score)
        return meat * bread**2

    ids = data.cluster_ids if cluster_ids is None else np.asarray(cluster_ids)
    if ids is None:
        raise ConfigurationError("cluster error model requires cluster ids")
    _, codes = np.unique(ids, return_inverse=True)
    n_clusters = int(codes.max()) + 1
    if n_clusters < 2:
        raise DegenerateEstimatorError("cluster-robust variance needs at least two clusters")
    sums = np.bincount(codes, weights=score, minlength=n_clusters)
    meat = float(sums @ sums)
    if small_sample:
        meat *= n_clusters / (n_clusters - 1)
    return meat * bread**2


def liml_k(data: ProjectedData) -> float:
    """Smallest root of det(M'M - k M'R_Z* M) = 0, M = [Y* : D*]."""
    a = data.mm
    b = data.mRm
    det_b = b[0, 0] * b[1, 1] - b[0, 1] ** 2
    if not det_b > 1e-14 * b[0, 0] * b[1, 1]:
        raise DesignError("M'R_Z*M is singular; LIML is undefined")
    det_a = a[0, 0] * a[1, 1] - a[0, 1] ** 2
    c1 = -(a[0, 0] * b[1, 1] + a[1, 1] * b[0, 0] - 2.0 * a[0, 1] * b[0, 1])
    disc = max(c1 * c1 - 4.0 * det_b * det_a, 0.0)
    q = -0.5 * (c1 + math.copysign(math.sqrt(disc), c1))
    roots = [q / det_b]
    if q != 0:
        roots.append(det_a / q)
    return float(min(roots))


def fuller_k(data: ProjectedData, b: float = 1.0) -> float:
    if not b > 0:
        raise ConfigurationError(f"Fuller constant must be positive, got {b!r}")
    return liml_k(data) - b / data.df_resid


def first_stage(data: ProjectedData, fit: KClassFit | None = None) -> FirstStageFit:
    """First-stage regression D* ~ Z* with the instrument F statistic.

    ``rho_hat`` is the correlation between first-stage residuals and the
    structural residuals of ``fit`` (TSLS when omitted).
    """
    if fit is None:
        fit = fit_k(data, 1.0)
    n, L, p = data.n, data.L, data.p
    gamma = np.linalg.solve(data.zz, data.zd)
    explained = float(gamma @ data.zz @ gamma)
    eta = data.d_star - data.z_star @ gamma
    ssr = float(eta @ eta)
    df2 = data.df_resid
    omega_sq = ssr / df2
    f_stat = (explained / L) / omega_sq if ssr > 0 else math.inf
    p_value = dist.f_sf(f_stat, L, df2) if math.isfinite(f_stat) else 0.0
    r2 = explained / data.dd
    adj = 1.0 - (1.0 - r2) * (n - p) / df2

    kappa_tilde = _covariate_coefficients(data, data.source.exposure - data.source.instruments @ gamma)
    if ssr > 0 and fit.residuals.std() > 0:
        rho = float(np.corrcoef(eta, fit.residuals)[0, 1])
    else:
        rho = 0.0
    return FirstStageFit(
        gamma_hat=gamma, kappa_tilde_hat=kappa_tilde, f_stat=f_stat, df1=L, df2=df2,
        p_value=p_value, r_squared=r2, adj_r_squared=adj, resid_se=math.sqrt(omega_sq),
        resid_df=n - p, omega_hat_sq=omega_sq, rho_hat=rho,
    )


def default_fits(data: ProjectedData, fuller_b: float = 1.0, error_model="homoskedastic", cluster_ids=None) -> dict[str, KClassFit]:
    """OLS, Fuller, TSLS and LIML fits keyed by name."""
    k_liml = liml_k(data)
    ks = {"OLS": 0.0, "Fuller": k_liml - fuller_b / data.df_resid, "TSLS": 1.0, "LIML": k_liml}
    fits = {}
    for name, k in ks.items():
        model = error_model if name == "TSLS" else "homoskedastic"
        fits[name] = fit_k(data, k, model, cluster_ids, label=name)
    return fits
