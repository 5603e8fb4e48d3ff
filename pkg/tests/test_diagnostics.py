import math
import re
from pathlib import Path

import matplotlib
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import DATA_DIR, simulate
from ivkit.dataset import IVData
from ivkit.diagnostics import DiagnosticsRow, correlation_matrix, emit_bias_chart, iv_diagnosis
from ivkit.errors import ConfigurationError, DegenerateEstimatorError, UnsupportedError
from ivkit.plotting import ratio_label

GOLDEN = DATA_DIR / "bias_chart_golden.svg"
GOLDEN_VERSION = DATA_DIR / "bias_chart_golden.version"
GOLDEN_ROWS = [
    DiagnosticsRow("alpha", 0.5, 0.2, 0.1, 0.8, 0.125, 0.05, 2.5),
    DiagnosticsRow("beta", -0.3, 0.1, -0.2, 0.8, -0.0375, 0.06, -0.625),
]


def _binary_design(seed=0, n=500):
    rng = np.random.default_rng(seed)
    z = rng.integers(0, 2, n).astype(float)
    x = rng.standard_normal((n, 2)) + 0.4 * z[:, None]
    d = 1.0 * z + x @ [0.3, -0.2] + rng.standard_normal(n)
    y = 0.5 * d + x @ [0.4, 0.1] + rng.standard_normal(n)
    return IVData(y, d, z, x, covariate_names=("a", "b"))


def test_binary_instrument_imbalance_is_mean_difference():
    data = _binary_design()
    z = data.instruments[:, 0]
    for row in iv_diagnosis(data):
        x = data.covariates[:, data.covariate_names.index(row.covariate_name)]
        assert row.iv_imbalance == pytest.approx(x[z == 1].mean() - x[z == 0].mean(), abs=1e-12)


def test_bias_formulas():
    data = _binary_design(1)
    design = np.column_stack([np.ones(data.n), data.exposure, data.covariates])
    kappa = np.linalg.lstsq(design, data.outcome, rcond=None)[0][2:]
    z, d = data.instruments[:, 0], data.exposure
    slope = lambda y, x: np.polyfit(x, y, 1)[0]  # noqa: E731
    for row in iv_diagnosis(data):
        j = data.covariate_names.index(row.covariate_name)
        x = data.covariates[:, j]
        assert row.bias_tsls == pytest.approx(kappa[j] * slope(x, z) / slope(d, z), rel=1e-9)
        assert row.bias_ols == pytest.approx(kappa[j] * slope(x, d), rel=1e-9)


def test_orthogonal_covariate_has_no_tsls_bias():
    data = simulate(n=300, seed=41)
    z = data.instruments[:, 0]
    zc = z - z.mean()
    x = data.covariates.copy()
    x[:, 0] = x[:, 0] - zc * (zc @ x[:, 0]) / (zc @ zc)
    row = {r.covariate_name: r for r in iv_diagnosis(IVData(data.outcome, data.exposure, data.instruments, x))}
    assert abs(row["X1"].bias_tsls) < 1e-12


def test_rows_sorted_by_tsls_bias(card_data):
    rows = iv_diagnosis(card_data)
    mags = [abs(r.bias_tsls) for r in rows]
    assert mags == sorted(mags, reverse=True)
    assert rows[0].covariate_name == "smsa"


def test_marginal_kappa_option(card_data):
    rows = {r.covariate_name: r for r in iv_diagnosis(card_data, kappa_method="marginal")}
    design = np.column_stack([np.ones(card_data.n), card_data.exposure, card_data.covariates[:, 4]])
    coef = np.linalg.lstsq(design, card_data.outcome, rcond=None)[0]
    assert rows["smsa"].kappa_hat_j == pytest.approx(coef[2], rel=1e-10)
    with pytest.raises(ConfigurationError):
        iv_diagnosis(card_data, kappa_method="other")


def test_degenerate_inputs():
    data = simulate(n=100, seed=42)
    rng = np.random.default_rng(0)
    z = rng.standard_normal(100)
    d = np.where(np.arange(100) % 2 == 0, 1.0, -1.0)
    z_orth = np.tile([1.0, 1.0, -1.0, -1.0], 25)  # uncorrelated with d exactly
    with pytest.raises(DegenerateEstimatorError):
        iv_diagnosis(IVData(data.outcome, d, z_orth, data.covariates))
    with pytest.raises(UnsupportedError):
        iv_diagnosis(simulate(n=100, seed=43, L=2))
    with pytest.raises(ConfigurationError):
        iv_diagnosis(IVData(data.outcome, data.exposure, z, np.zeros((100, 0))))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 5000), c=st.floats(0.01, 100.0))
def test_scale_invariance(seed, c):
    data = simulate(n=150, seed=seed)
    base = {r.covariate_name: r for r in iv_diagnosis(data)}
    x = data.covariates.copy()
    x[:, 0] *= c
    scaled_x = {r.covariate_name: r for r in iv_diagnosis(IVData(data.outcome, data.exposure, data.instruments, x))}
    assert scaled_x["X1"].bias_ratio == pytest.approx(base["X1"].bias_ratio, rel=1e-8)
    assert scaled_x["X1"].bias_tsls == pytest.approx(base["X1"].bias_tsls, rel=1e-8, abs=1e-12)
    scaled_z = {r.covariate_name: r for r in iv_diagnosis(IVData(data.outcome, data.exposure, c * data.instruments, data.covariates))}
    for name in base:
        assert scaled_z[name].bias_tsls == pytest.approx(base[name].bias_tsls, rel=1e-8, abs=1e-12)


def test_correlation_hand_example():
    # columns Z, D, X, Y on four points
    z = np.array([1.0, 2.0, 3.0, 4.0])
    d = np.array([2.0, 1.0, 4.0, 3.0])
    x = np.array([[1.0], [0.0], [0.0], [1.0]])
    y = np.array([1.0, 3.0, 2.0, 5.0])
    cm = correlation_matrix(IVData(y, d, z, x, intercept=False))
    # Z,D: deviations (-1.5,-.5,.5,1.5), (-.5,-1.5,1.5,.5); sum = .75+.75+.75+.75 = 3; norms sqrt(5)
    assert cm["Z1", "D"] == pytest.approx(3 / 5, abs=1e-15)
    # Z,Y: Y deviations (-1.75,.25,-.75,2.25); sum = 2.625-.125-.375+3.375 = 5.5; |Y| = sqrt(8.75)
    assert cm["Z1", "Y"] == pytest.approx(5.5 / math.sqrt(5 * 8.75), abs=1e-15)
    # X deviations (.5,-.5,-.5,.5): corr with Z is 0
    assert cm["X1", "Z1"] == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(np.diag(cm.values), 1.0)
    assert np.allclose(cm.values, cm.values.T)


def test_correlation_zero_variance_flagged():
    data = simulate(n=50, seed=44)
    x = np.column_stack([data.covariates[:, 0], np.full(50, 3.0)])
    cm = correlation_matrix(IVData(data.outcome, data.exposure, data.instruments, x, intercept=False))
    assert math.isnan(cm["X2", "D"]) and math.isnan(cm["X2", "X2"])
    assert cm["X1", "X1"] == 1.0


def test_ratio_labels():
    assert ratio_label(0.0, 0.0) == "0/0"
    assert ratio_label(0.0669, 0.00512) == "13.07"
    assert ratio_label(-0.05, 0.1) == "-0.50"


def test_chart_rows_and_labels(card_data, tmp_path):
    out = emit_bias_chart(iv_diagnosis(card_data), tmp_path / "bias.svg")
    text = out.read_text()
    assert text.startswith("<?xml") and 'version="1.1"' in text
    labels = re.findall(r"<!-- (.*?) -->", text)
    for name in ("smsa", "exper", "south", "expersq", "black"):
        assert name in labels
    assert any(s.startswith("13.") for s in labels)


def test_chart_zero_bias_sentinel(tmp_path):
    row = DiagnosticsRow("flat", 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, math.nan)
    text = emit_bias_chart([row], tmp_path / "zero.svg").read_text()
    assert "<!-- 0/0 -->" in text


def test_chart_requires_rows(tmp_path):
    with pytest.raises(ConfigurationError):
        emit_bias_chart([], tmp_path / "x.svg")


def test_chart_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        emit_bias_chart(GOLDEN_ROWS, tmp_path / "missing" / "x.svg")


def test_chart_deterministic(tmp_path):
    a = emit_bias_chart(GOLDEN_ROWS, tmp_path / "a.svg").read_bytes()
    b = emit_bias_chart(GOLDEN_ROWS, tmp_path / "b.svg").read_bytes()
    assert a == b


def test_chart_matches_golden(tmp_path):
    if GOLDEN_VERSION.read_text().strip() != matplotlib.__version__:
        pytest.skip("golden SVG was rendered with a different matplotlib version")
    out = emit_bias_chart(GOLDEN_ROWS, tmp_path / "g.svg")
    assert out.read_bytes() == GOLDEN.read_bytes()
