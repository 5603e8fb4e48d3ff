import numpy as np
import pytest

from conftest import CARD, simulate
from ivkit.dataset import IVData, load_csv, numerical_rank, project
from ivkit.errors import ConfigurationError, DesignError, InsufficientDataError


def test_card_fixture_shape(card_data):
    assert (card_data.n, card_data.L, card_data.p) == (3010, 1, 6)
    assert card_data.covariate_names == ("exper", "expersq", "black", "south", "smsa")


def test_residuals_orthogonal_to_covariates():
    data = simulate(seed=3)
    proj = project(data)
    x = data.design()
    for v in (proj.y_star, proj.d_star, proj.z_star[:, 0]):
        assert np.max(np.abs(x.T @ v)) < 1e-9


def test_projection_is_idempotent():
    data = simulate(seed=4, L=2)
    proj = project(data)
    pd_ = proj.project_z(proj.d_star)
    assert np.allclose(proj.project_z(pd_), pd_, atol=1e-10)
    assert float(pd_ @ pd_) == pytest.approx(proj.dPd, rel=1e-12)


def test_projection_invariant_to_covariate_reparameterization():
    data = simulate(seed=5, p_x=3)
    a = np.array([[2.0, 0.5, 0.0], [0.0, 1.0, -1.0], [0.3, 0.0, 4.0]])
    other = IVData(data.outcome, data.exposure, data.instruments, data.covariates @ a)
    p1, p2 = project(data), project(other)
    assert np.allclose(p1.y_star, p2.y_star, atol=1e-10)
    assert np.allclose(p1.d_star, p2.d_star, atol=1e-10)


def test_missing_rows_dropped(tmp_path):
    src = CARD.read_text().splitlines()
    head = src[0].split(",")
    row = src[1].split(",")
    row[head.index("educ")] = "NA"
    row2 = src[2].split(",")
    row2[head.index("lwage")] = ""
    path = tmp_path / "holes.csv"
    path.write_text("\n".join([src[0], ",".join(row), ",".join(row2), *src[3:]]) + "\n")
    data = load_csv(path, "lwage", "educ", ["nearc4"], ["exper"])
    assert data.n == 3008 and data.n_dropped == 2


def test_unknown_column_named():
    with pytest.raises(ConfigurationError, match="nearc5"):
        load_csv(CARD, "lwage", "educ", ["nearc5"])


def test_collinear_covariate_named():
    data = simulate(seed=1)
    x = np.column_stack([data.covariates, 2.0 * data.covariates[:, 0]])
    with pytest.raises(DesignError, match="X3"):
        IVData(data.outcome, data.exposure, data.instruments, x)


def test_too_few_rows():
    with pytest.raises(InsufficientDataError):
        IVData(np.arange(3.0), np.arange(3.0), np.arange(3.0), np.zeros((3, 0)))


def test_instrument_in_covariate_span_rejected():
    data = simulate(seed=2)
    with pytest.raises(DesignError):
        project(IVData(data.outcome, data.exposure, data.covariates[:, :1], data.covariates))


def test_numerical_rank():
    a = np.column_stack([np.ones(5), np.arange(5.0), 2 * np.arange(5.0)])
    assert numerical_rank(a) == 2


def test_drop_covariates(card_data):
    smaller = card_data.drop_covariates(["south"])
    assert smaller.covariate_names == ("exper", "expersq", "black", "smsa")
    with pytest.raises(ConfigurationError):
        card_data.drop_covariates(["nope"])
