import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ivkit import dist
from ivkit.errors import DomainError, SearchLimitError
from ivkit.power import (
    PowerDesign,
    PowerMethod,
    PowerSpec,
    min_sample_size,
    power,
    power_ar,
    power_ar_sens,
    power_tsls,
)

DESIGN = PowerDesign(sigma=1.0, omega=1.2, rho=0.4, gamma=0.3, z_var=1.0, var_d=1.5, rho_zd=0.25, p=2, L=1)


def test_power_ar_matches_simulated_rejection_rate():
    start = time.perf_counter()
    n, p, reps = 200, 2, 100_000
    rng = np.random.default_rng(1234)
    z = rng.standard_normal(n)
    x = np.column_stack([np.ones(n), rng.standard_normal(n)])
    qx, _ = np.linalg.qr(x)
    z_star = z - qx @ (qx.T @ z)
    qz = z_star / np.linalg.norm(z_star)
    sigma, omega, rho, gamma, lam = 1.0, 1.5, 0.6, 0.25, 0.35
    design = PowerDesign(
        sigma=sigma, omega=omega, rho=rho, gamma=gamma, z_var=float(z_star @ z_star) / n,
        var_d=1.0, rho_zd=0.1, p=p, L=1,
    )
    expected = power_ar(lam, n, design)

    df2 = n - 1 - p
    crit = dist.f_quantile(0.95, 1, df2)
    rejections = 0
    for _ in range(10):
        m = reps // 10
        e = sigma * rng.standard_normal((m, n))
        eta = omega * (rho * e / sigma + math.sqrt(1 - rho**2) * rng.standard_normal((m, n)))
        d = np.outer(np.ones(m), gamma * z + x @ [0.5, 0.2]) + eta
        u = lam * d + e + x @ [1.0, -0.3]  # outcome minus D * beta0
        u_star = u - (u @ qx) @ qx.T
        pu = u_star @ qz
        ssr = np.einsum("ij,ij->i", u_star, u_star) - pu**2
        stat = pu**2 / (ssr / df2)
        rejections += int(np.sum(stat > crit))
    rate = rejections / reps
    se = math.sqrt(expected * (1 - expected) / reps)
    assert abs(rate - expected) < 3 * se
    assert time.perf_counter() - start < 60


def test_tsls_power_formula():
    lam, n = 0.2, 500
    shift = lam * DESIGN.rho_zd * math.sqrt(n * DESIGN.var_d) / DESIGN.sigma
    z = dist.normal_quantile(0.975)
    expected = dist.normal_sf(z - shift) + dist.normal_cdf(-z - shift)
    assert power_tsls(lam, n, DESIGN) == pytest.approx(expected, abs=1e-14)
    assert power_tsls(0.0, n, DESIGN) == pytest.approx(0.05, abs=1e-12)


def test_sensitivity_power_without_delta_is_ar_power():
    for lam in (0.1, 0.5):
        assert power_ar_sens(lam, 300, DESIGN, 0.0) == pytest.approx(power_ar(lam, 300, DESIGN), abs=1e-12)


def test_least_favorable_alternative_is_conservative():
    lf = power_ar_sens(0.5, 400, DESIGN, 0.05)
    valid = power_ar_sens(0.5, 400, DESIGN, 0.05, least_favorable=False)
    assert lf < valid


@pytest.mark.parametrize("method", list(PowerMethod))
def test_min_sample_size_is_smallest(method):
    spec = PowerSpec(0.4, 100, DESIGN, method, delta_max=0.02)
    n = min_sample_size(spec, 0.8)
    assert power(PowerSpec(0.4, n, DESIGN, method, delta_max=0.02)) >= 0.8
    assert power(PowerSpec(0.4, n - 1, DESIGN, method, delta_max=0.02)) < 0.8


def test_unreachable_target_raises():
    spec = PowerSpec(0.0, 100, DESIGN, PowerMethod.AR)
    with pytest.raises(SearchLimitError):
        min_sample_size(spec, 0.8, limit=10_000)


def test_design_validation():
    with pytest.raises(DomainError):
        PowerDesign(sigma=1.0, omega=1.0, rho=1.0, gamma=0.3, z_var=1.0, var_d=1.0, rho_zd=0.1)
    with pytest.raises(DomainError):
        power_ar(0.1, 3, DESIGN)
    assert PowerMethod.parse("arsens") is PowerMethod.AR_SENS


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.01, 2.0), n=st.integers(10, 5000), method=st.sampled_from(["tsls", "ar"]))
def test_power_nondecreasing_in_n(lam, n, method):
    a = power(PowerSpec(lam, n, DESIGN, method))
    b = power(PowerSpec(lam, n + 37, DESIGN, method))
    assert b >= a - 1e-12
    assert 0.0 <= a <= 1.0


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(0.2, 2.0), n=st.integers(10, 5000))
def test_sensitivity_power_nondecreasing_when_signal_dominates(lam, n):
    delta = 0.01  # |lam * gamma| - delta * sigma >= 0.05
    a = power_ar_sens(lam, n, DESIGN, delta)
    b = power_ar_sens(lam, n + 37, DESIGN, delta)
    assert b >= a - 1e-12


def test_sensitivity_power_vanishes_when_delta_dominates():
    # signal below the worst-case direct effect: power falls toward zero with n
    lam, delta = 0.1, 0.05
    values = [power_ar_sens(lam, n, DESIGN, delta) for n in (100, 1000, 10_000, 100_000)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-3


def test_sensitivity_power_decreasing_in_delta():
    values = [power_ar_sens(0.5, 2000, DESIGN, d) for d in (0.0, 0.02, 0.05, 0.1, 0.2)]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_power_symmetry_and_small_effect_limit():
    sym = PowerDesign(sigma=1.0, omega=1.2, rho=0.0, gamma=0.3, z_var=1.0, var_d=1.5, rho_zd=0.25, p=2, L=1)
    for lam in (0.1, 0.7):
        assert power_ar(lam, 300, sym) == pytest.approx(power_ar(-lam, 300, sym), abs=1e-14)
        assert power_tsls(lam, 300, DESIGN) == pytest.approx(power_tsls(-lam, 300, DESIGN), abs=1e-14)
    assert power_ar(1e-6, 300, DESIGN) == pytest.approx(0.05, abs=1e-9)
