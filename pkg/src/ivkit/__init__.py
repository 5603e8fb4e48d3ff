"""Instrumental variables estimation, weak-instrument-robust inference,
power, sensitivity analysis and covariate-imbalance diagnostics for one
endogenous exposure."""

from .dataset import IVData, ProjectedData, load_csv, project
from .diagnostics import DiagnosticsRow, correlation_matrix, emit_bias_chart, iv_diagnosis
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DegenerateEstimatorError,
    DesignError,
    DomainError,
    InsufficientDataError,
    IVError,
    SearchLimitError,
    UnsupportedError,
)
from .kclass import ErrorModel, KClassFit, default_fits, first_stage, fit_k, fuller_k, liml_k, robust_variance
from .power import PowerDesign, PowerMethod, PowerSpec, min_sample_size, power
from .sensitivity import SensitivitySpec, sens_interval
from .weakiv import IntervalSet, SetKind, TestResult, ar_test, clr_test

__version__ = "0.1.0"

__all__ = [
    "IVData", "ProjectedData", "load_csv", "project",
    "DiagnosticsRow", "correlation_matrix", "emit_bias_chart", "iv_diagnosis",
    "ConfigurationError", "ConvergenceError", "DegenerateEstimatorError", "DesignError",
    "DomainError", "InsufficientDataError", "IVError", "SearchLimitError", "UnsupportedError",
    "ErrorModel", "KClassFit", "default_fits", "first_stage", "fit_k", "fuller_k", "liml_k", "robust_variance",
    "PowerDesign", "PowerMethod", "PowerSpec", "min_sample_size", "power",
    "SensitivitySpec", "sens_interval",
    "IntervalSet", "SetKind", "TestResult", "ar_test", "clr_test",
]
