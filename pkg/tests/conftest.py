from pathlib import Path

import numpy as np
import pytest

from ivkit.dataset import IVData, load_csv, project

DATA_DIR = Path(__file__).parent / "data"
CARD = DATA_DIR / "card.csv"
CARD_COVARIATES = ("exper", "expersq", "black", "south", "smsa")


def card(covariates=CARD_COVARIATES) -> IVData:
    return load_csv(CARD, "lwage", "educ", ["nearc4"], list(covariates))


def simulate(n=400, L=1, p_x=2, gamma=0.8, beta=0.5, rho=0.5, seed=0, intercept=True) -> IVData:
    """Linear IV design with correlated structural and first-stage errors."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, L))
    x = rng.standard_normal((n, p_x))
    e = rng.standard_normal(n)
    eta = rho * e + np.sqrt(1 - rho**2) * rng.standard_normal(n)
    g = np.full(L, gamma) if np.isscalar(gamma) else np.asarray(gamma)
    d = z @ g + x @ np.linspace(0.2, 0.4, p_x) + eta + 1.0
    y = beta * d + x @ np.linspace(-0.3, 0.3, p_x) + e + 2.0
    return IVData(y, d, z, x, intercept=intercept)


@pytest.fixture(scope="session")
def card_data() -> IVData:
    return card()


@pytest.fixture(scope="session")
def card_proj(card_data):
    return project(card_data)
