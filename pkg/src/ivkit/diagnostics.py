"""Covariate-imbalance diagnostics comparing unadjusted TSLS and OLS bias.

If the untreated outcome depended linearly on a single covariate X_j with
coefficient kappa_j, the unadjusted estimators would be biased by

    bias_tsls = kappa_j * slope(X_j ~ Z) / slope(D ~ Z)
    bias_ols  = kappa_j * slope(X_j ~ D)

For binary Z or D the slopes are differences in group means.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .dataset import IVData
from .errors import ConfigurationError, DegenerateEstimatorError, UnsupportedError


@dataclass(frozen=True)
class DiagnosticsRow:
    covariate_name: str
    kappa_hat_j: float
    iv_imbalance: float
    ols_imbalance: float
    d_on_z_slope: float
    bias_tsls: float
    bias_ols: float
    bias_ratio: float

    @property
    def ratio_defined(self) -> bool:
        return self.bias_ols != 0

    def to_dict(self) -> dict:
        out = asdict(self)
        if not math.isfinite(self.bias_ratio):
            out["bias_ratio"] = None
        return out


def _slope(y: np.ndarray, x: np.ndarray) -> float:
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        return math.nan
    return float(xc @ (y - y.mean())) / sxx


def _kappa(data: IVData, method: str) -> np.ndarray:
    if method == "joint":
        design = np.column_stack([np.ones(data.n), data.exposure, data.covariates])
        coef, *_ = np.linalg.lstsq(design, data.outcome, rcond=None)
        return coef[2:]
    if method == "marginal":
        out = []
        for j in range(data.covariates.shape[1]):
            design = np.column_stack([np.ones(data.n), data.exposure, data.covariates[:, j]])
            coef, *_ = np.linalg.lstsq(design, data.outcome, rcond=None)
            out.append(coef[2])
        return np.array(out)
    raise ConfigurationError(f"unknown kappa estimation method {method!r}")


def iv_diagnosis(data: IVData, kappa_method: str = "joint") -> list[DiagnosticsRow]:
    """Per-covariate bias estimates, sorted by |bias_tsls| (largest first).

    ``kappa_method="joint"`` takes kappa_j from the OLS regression of Y on
    an intercept, D and all covariates; ``"marginal"`` regresses Y on D and
    X_j alone.  Variables are used as supplied, without covariate adjustment.
    """
    if data.L != 1:
        raise UnsupportedError("the bias diagnostic needs a single instrument")
    if data.covariates.shape[1] == 0:
        raise ConfigurationError("the bias diagnostic needs at least one covariate")
    z = data.instruments[:, 0]
    d = data.exposure
    dz = _slope(d, z)
    if not (math.isfinite(dz) and abs(dz) > 1e-12 * (np.std(d) / max(np.std(z), 1e-300))):
        raise DegenerateEstimatorError("slope of D on Z is numerically zero; TSLS bias is undefined")
    kappa = _kappa(data, kappa_method)

    rows = []
    for j, name in enumerate(data.covariate_names):
        x = data.covariates[:, j]
        iv_imb = _slope(x, z)
        ols_imb = _slope(x, d)
        b_tsls = kappa[j] * iv_imb / dz
        b_ols = kappa[j] * ols_imb
        ratio = b_tsls / b_ols if b_ols != 0 else math.nan
        rows.append(DiagnosticsRow(name, float(kappa[j]), iv_imb, ols_imb, dz, float(b_tsls), float(b_ols), float(ratio)))
    rows.sort(key=lambda r: -abs(r.bias_tsls))
    return rows


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple[str, ...]
    values: np.ndarray

    def __getitem__(self, key: tuple[str, str]) -> float:
        i, j = (self.labels.index(k) for k in key)
        return float(self.values[i, j])


def correlation_matrix(data: IVData) -> CorrelationMatrix:
    """Pearson correlations of Z, D, the covariates and Y (in that order).

    Columns with zero variance produce NaN entries.
    """
    if data.n < 2:
        raise ConfigurationError("need at least two rows for correlations")
    cols = np.column_stack([data.instruments, data.exposure, data.covariates, data.outcome])
    labels = (*data.instrument_names, data.exposure_name, *data.covariate_names, data.outcome_name)
    centered = cols - cols.mean(axis=0)
    norms = np.sqrt(np.einsum("ij,ij->j", centered, centered))
    with np.errstate(divide="ignore", invalid="ignore"):
        corr = (centered.T @ centered) / np.outer(norms, norms)
    corr[:, norms == 0] = np.nan
    corr[norms == 0, :] = np.nan
    np.fill_diagonal(corr, np.where(norms > 0, 1.0, np.nan))
    return CorrelationMatrix(labels, corr)


def emit_bias_chart(rows: list[DiagnosticsRow], out_path: str | Path) -> Path:
    """Write the paired-bar bias chart as SVG."""
    from .plotting import bias_chart

    if not rows:
        raise ConfigurationError("no diagnostic rows to plot")
    return bias_chart(rows, out_path)
