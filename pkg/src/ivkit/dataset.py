"""Data ingestion, design validation and covariate residualization.

Everything downstream works with the covariate-adjusted variables

    Y* = R_X Y,  D* = R_X D,  Z* = R_X Z

where ``R_X`` is the residual maker of the exogenous covariate block (intercept
included when enabled).  The n x n projection is never formed; residuals come
from a pivoted QR factorization of the covariate block.
"""

from __future__ import annotations

import logging
from collections.abc import Hashable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import scipy.linalg

from .errors import ConfigurationError, DesignError, InsufficientDataError

logger = logging.getLogger(__name__)

NA_VALUES = ["", "NA"]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


def _as_matrix(a, n: int | None = None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ConfigurationError(f"expected a vector or matrix, got shape {a.shape}")
    if n is not None and a.shape[0] != n and a.size == 0:
        a = np.zeros((n, 0))
    return a


def _rank_tolerance(s: np.ndarray, shape: tuple[int, int]) -> float:
    if s.size == 0:
        return 0.0
    return max(shape) * np.finfo(float).eps * s[0]


def numerical_rank(a: np.ndarray) -> int:
    """Rank of ``a`` using the ``max_dim * eps * s_max`` singular-value cutoff."""
    if a.shape[1] == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > _rank_tolerance(s, a.shape)))


@dataclass(frozen=True, eq=False)
class IVData:
    """Raw IV design: outcome, one exposure, L instruments, covariates.

    ``covariates`` excludes the intercept; set ``intercept=False`` to fit
    without one.  Cluster labels (any hashable) are mapped to integer ids
    in order of first appearance.
    """

    outcome: np.ndarray
    exposure: np.ndarray
    instruments: np.ndarray
    covariates: np.ndarray
    intercept: bool = True
    cluster_labels: Sequence[Hashable] | None = None
    outcome_name: str = "Y"
    exposure_name: str = "D"
    instrument_names: tuple[str, ...] = ()
    covariate_names: tuple[str, ...] = ()
    n_dropped: int = 0
    cluster_ids: np.ndarray | None = field(init=False, default=None)

    def __post_init__(self):
        y = np.asarray(self.outcome, dtype=float).ravel()
        d = np.asarray(self.exposure, dtype=float).ravel()
        n = y.shape[0]
        z = _as_matrix(self.instruments)
        x = np.asarray(self.covariates, dtype=float)
        if x.size == 0:
            x = np.zeros((n, 0))
        x = _as_matrix(x)

        if not (d.shape[0] == z.shape[0] == x.shape[0] == n):
            raise ConfigurationError(
                f"column lengths differ: outcome {n}, exposure {d.shape[0]}, "
                f"instruments {z.shape[0]}, covariates {x.shape[0]}"
            )
        if z.shape[1] == 0:
            raise ConfigurationError("at least one instrument is required")
        for name, a in (("outcome", y), ("exposure", d), ("instruments", z), ("covariates", x)):
            if not np.all(np.isfinite(a)):
                raise ConfigurationError(f"{name} contains non-finite values")

        inames = tuple(self.instrument_names) or tuple(f"Z{j + 1}" for j in range(z.shape[1]))
        xnames = tuple(self.covariate_names) or tuple(f"X{j + 1}" for j in range(x.shape[1]))
        if len(inames) != z.shape[1] or len(xnames) != x.shape[1]:
            raise ConfigurationError("number of names does not match number of columns")

        set_ = object.__setattr__
        set_(self, "outcome", _readonly(y))
        set_(self, "exposure", _readonly(d))
        set_(self, "instruments", _readonly(z))
        set_(self, "covariates", _readonly(x))
        set_(self, "instrument_names", inames)
        set_(self, "covariate_names", xnames)

        if self.cluster_labels is not None:
            labels = list(self.cluster_labels)
            if len(labels) != n:
                raise ConfigurationError("cluster labels must have one entry per row")
            ids: dict[Hashable, int] = {}
            codes = np.array([ids.setdefault(lab, len(ids)) for lab in labels], dtype=np.intp)
            codes.flags.writeable = False
            set_(self, "cluster_ids", codes)

        if n <= self.L + self.p + 1:
            raise InsufficientDataError(
                f"need more than L + p + 1 = {self.L + self.p + 1} rows, got {n}"
            )
        self._check_rank()

    @property
    def n(self) -> int:
        return self.outcome.shape[0]

    @property
    def L(self) -> int:
        return self.instruments.shape[1]

    @property
    def p(self) -> int:
        """Number of exogenous covariate columns including the intercept."""
        return self.covariates.shape[1] + int(self.intercept)

    def design(self) -> np.ndarray:
        """Covariate block ``[intercept : X]`` (n x p)."""
        cols = [np.ones((self.n, 1))] if self.intercept else []
        return np.hstack(cols + [self.covariates]) if cols or self.covariates.size else np.zeros((self.n, 0))

    def _check_rank(self):
        x = self.design()
        w = np.hstack([self.instruments, x])
        if numerical_rank(w) == w.shape[1]:
            return
        names = list(self.instrument_names) + (["(intercept)"] if self.intercept else []) + list(self.covariate_names)
        # Order the scan so that a redundant covariate is blamed before an instrument.
        order = list(range(self.L, w.shape[1])) + list(range(self.L))
        kept: list[int] = []
        for j in order:
            if numerical_rank(w[:, kept + [j]]) < len(kept) + 1:
                raise DesignError(f"design matrix is rank deficient: column '{names[j]}' is collinear with earlier columns")
            kept.append(j)
        raise DesignError("design matrix is rank deficient")  # pragma: no cover

    def drop_covariates(self, names: Sequence[str]) -> "IVData":
        """Copy of the data without the named covariates."""
        unknown = set(names) - set(self.covariate_names)
        if unknown:
            raise ConfigurationError(f"unknown covariate(s): {', '.join(sorted(unknown))}")
        keep = [j for j, nm in enumerate(self.covariate_names) if nm not in set(names)]
        return IVData(
            self.outcome, self.exposure, self.instruments, self.covariates[:, keep],
            intercept=self.intercept, cluster_labels=self.cluster_labels,
            outcome_name=self.outcome_name, exposure_name=self.exposure_name,
            instrument_names=self.instrument_names,
            covariate_names=tuple(self.covariate_names[j] for j in keep),
            n_dropped=self.n_dropped,
        )


def load_csv(
    path: str | Path,
    outcome: str,
    exposure: str,
    instruments: Sequence[str],
    covariates: Sequence[str] = (),
    cluster: str | None = None,
    intercept: bool = True,
) -> IVData:
    """Read a CSV file and build an :class:`IVData`.

    Rows with a missing (empty or ``NA``) or non-numeric cell in any used
    column are dropped; the count is logged and stored in ``n_dropped``.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"data file not found: {path}")
    frame = pd.read_csv(path, na_values=NA_VALUES, keep_default_na=False, dtype=str, encoding="utf-8")

    numeric = [outcome, exposure, *instruments, *covariates]
    wanted = numeric + ([cluster] if cluster else [])
    missing = [c for c in wanted if c not in frame.columns]
    if missing:
        raise ConfigurationError(f"column(s) not found in {path.name}: {', '.join(missing)}")
    if len(set(numeric)) != len(numeric):
        raise ConfigurationError("a column is used in more than one role")

    values = frame[numeric].apply(pd.to_numeric, errors="coerce")
    ok = values.notna().all(axis=1) & np.isfinite(values.to_numpy(dtype=float)).all(axis=1)
    if cluster:
        ok &= frame[cluster].notna()
    n_dropped = int((~ok).sum())
    if n_dropped:
        logger.info("dropped %d row(s) with missing or non-numeric values", n_dropped)
    values = values[ok]

    L, p = len(instruments), len(covariates) + int(intercept)
    if len(values) < L + p + 2:
        raise InsufficientDataError(
            f"only {len(values)} complete row(s); need at least L + p + 2 = {L + p + 2}"
        )
    return IVData(
        outcome=values[outcome].to_numpy(float),
        exposure=values[exposure].to_numpy(float),
        instruments=values[list(instruments)].to_numpy(float),
        covariates=values[list(covariates)].to_numpy(float) if covariates else np.zeros((len(values), 0)),
        intercept=intercept,
        cluster_labels=frame.loc[ok, cluster].tolist() if cluster else None,
        outcome_name=outcome,
        exposure_name=exposure,
        instrument_names=tuple(instruments),
        covariate_names=tuple(covariates),
        n_dropped=n_dropped,
    )


class _Residualizer:
    """Applies R_X through an orthonormal basis of span(X)."""

    def __init__(self, x: np.ndarray):
        if x.shape[1] == 0:
            self.q = np.zeros((x.shape[0], 0))
            return
        q, r, _ = scipy.linalg.qr(x, mode="economic", pivoting=True)
        s = np.linalg.svd(r, compute_uv=False)
        if np.sum(s > _rank_tolerance(s, x.shape)) < x.shape[1]:
            raise DesignError("covariate matrix is numerically rank deficient")
        self.q = q

    def __call__(self, v: np.ndarray) -> np.ndarray:
        return v - self.q @ (self.q.T @ v)


@dataclass(frozen=True, eq=False)
class ProjectedData:
    """Covariate-residualized design with cached cross-products.

    Cross-products are named by their factors, e.g. ``dPy = D*' P_{Z*} Y*``
    and ``mRm = M' R_{Z*} M`` with ``M = [Y* : D*]``.
    """

    y_star: np.ndarray
    d_star: np.ndarray
    z_star: np.ndarray
    n: int
    L: int
    p: int
    source: IVData
    zz: np.ndarray
    zd: np.ndarray
    zy: np.ndarray
    dd: float
    dy: float
    yy: float
    dPd: float
    dPy: float
    yPy: float
    mRm: np.ndarray

    @property
    def df_resid(self) -> int:
        """n - L - p, the denominator df of the first-stage and AR F tests."""
        return self.n - self.L - self.p

    @property
    def mm(self) -> np.ndarray:
        return np.array([[self.yy, self.dy], [self.dy, self.dd]])

    @property
    def mPm(self) -> np.ndarray:
        return np.array([[self.yPy, self.dPy], [self.dPy, self.dPd]])

    @property
    def cluster_ids(self) -> np.ndarray | None:
        return self.source.cluster_ids

    def project_z(self, v: np.ndarray) -> np.ndarray:
        """P_{Z*} v for an n-vector v."""
        return self.z_star @ np.linalg.solve(self.zz, self.z_star.T @ v)

    def zz_inv_sqrt(self) -> np.ndarray:
        """Symmetric inverse square root of Z*'Z*."""
        w, v = np.linalg.eigh(self.zz)
        return (v / np.sqrt(w)) @ v.T


def project(data: IVData) -> ProjectedData:
    """Residualize Y, D and Z on the covariate block and cache cross-products."""
    resid = _Residualizer(data.design())
    y = resid(data.outcome)
    d = resid(data.exposure)
    z = resid(data.instruments)
    for a in (y, d, z):
        a.flags.writeable = False

    zz = z.T @ z
    zz = (zz + zz.T) / 2
    w = np.linalg.eigvalsh(zz)
    if w[0] <= _rank_tolerance(w[::-1], z.shape) or w[0] <= 0:
        raise DesignError("residualized instruments are collinear with the covariates")

    # Residuals on Z* are formed explicitly: M'M - M'PM cancels badly for strong instruments.
    qz, _ = np.linalg.qr(z)
    m = np.column_stack([y, d])
    qm = qz.T @ m
    m_res = m - qz @ qm
    mPm = qm.T @ qm
    mRm = m_res.T @ m_res
    mRm = (mRm + mRm.T) / 2
    for a in (zz, mRm):
        a.flags.writeable = False

    return ProjectedData(
        y_star=y, d_star=d, z_star=z, n=data.n, L=data.L, p=data.p, source=data,
        zz=zz, zd=z.T @ d, zy=z.T @ y,
        dd=float(d @ d), dy=float(d @ y), yy=float(y @ y),
        dPd=float(mPm[1, 1]), dPy=float(mPm[0, 1]), yPy=float(mPm[0, 0]),
        mRm=mRm,
    )
