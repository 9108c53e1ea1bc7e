import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from nnmix.copulas import (
    GaussianCopula,
    GumbelCopula,
    bvn_cdf,
    gaussian_from_kendall_tau,
    gumbel_from_kendall_tau,
)


def test_parameter_ranges_enforced():
    with pytest.raises(ValueError):
        GaussianCopula(1.0)
    with pytest.raises(ValueError):
        GumbelCopula(0.9)
    with pytest.raises(ValueError):
        GumbelCopula(50.5)
    GumbelCopula(50.0)  # the cap itself is allowed


def test_independence_cases(rng):
    t1 = rng.uniform(0.05, 0.95, 20)
    t2 = rng.uniform(0.05, 0.95, 20)
    np.testing.assert_allclose(GaussianCopula(0.0).density(t1, t2), 1.0, atol=1e-12)
    np.testing.assert_allclose(GumbelCopula(1.0).density(t1, t2), 1.0, atol=1e-12)
    np.testing.assert_allclose(GaussianCopula(0.0).conditional_cdf(t1, t2), t1, atol=1e-12)
    np.testing.assert_allclose(GumbelCopula(1.0).conditional_cdf(t1, t2), t1, atol=1e-12)
    z = rng.uniform(0.05, 0.95, 20)
    np.testing.assert_allclose(GaussianCopula(0.0).inverse_conditional(z, t2), z, atol=1e-12)
    np.testing.assert_allclose(GumbelCopula(1.0).inverse_conditional(z, t2), z, atol=1e-10)


def test_gaussian_density_matches_bivariate_normal_ratio():
    # c(t1, t2) = phi2(q1, q2; rho) / (phi(q1) phi(q2))
    rho = 0.5
    cop = GaussianCopula(rho)
    for t1, t2 in [(0.5, 0.5), (0.2, 0.7), (0.9, 0.1)]:
        q1, q2 = stats.norm.ppf([t1, t2])
        num = stats.multivariate_normal(cov=[[1, rho], [rho, 1]]).pdf([q1, q2])
        den = stats.norm.pdf(q1) * stats.norm.pdf(q2)
        assert cop.density(t1, t2) == pytest.approx(num / den, rel=1e-10)


def test_gumbel_density_matches_finite_difference():
    cop = GumbelCopula(2.5)
    h = 1e-5
    for t1, t2 in [(0.4, 0.6), (0.2, 0.85)]:
        num = (
            cop.cdf(t1 + h, t2 + h) - cop.cdf(t1 - h, t2 + h)
            - cop.cdf(t1 + h, t2 - h) + cop.cdf(t1 - h, t2 - h)
        ) / (4 * h * h)
        assert cop.density(t1, t2) == pytest.approx(num, rel=1e-5)


def test_bvn_cdf_against_scipy(rng):
    for rho in (-0.8, -0.3, 0.0, 0.45, 0.9):
        mvn = stats.multivariate_normal(cov=[[1, rho], [rho, 1]])
        for _ in range(20):
            h, k = rng.normal(size=2) * 1.5
            assert bvn_cdf(h, k, rho) == pytest.approx(mvn.cdf([h, k]), abs=2e-9)


@pytest.mark.parametrize("cop", [GaussianCopula(0.9), GaussianCopula(-0.6), GumbelCopula(3.0)])
def test_conditional_cdf_is_derivative_of_cdf(cop, rng):
    # central difference in the conditioning argument
    for t1, t2 in [(0.3, 0.5), (0.7, 0.25), (0.55, 0.8)]:
        h = 1e-6
        num = (cop.cdf(t1, t2 + h) - cop.cdf(t1, t2 - h)) / (2 * h)
        assert cop.conditional_cdf(t1, t2) == pytest.approx(num, abs=1e-6)


@pytest.mark.parametrize("cop", [GaussianCopula(0.9), GumbelCopula(4.0)])
def test_conditional_cdf_monotone_with_limits(cop):
    t2 = 0.5
    t1 = np.linspace(1e-6, 1 - 1e-6, 200)
    vals = cop.conditional_cdf(t1, t2)
    assert np.all(np.diff(vals) >= -1e-12)
    assert vals[0] < 1e-3
    assert vals[-1] > 1 - 1e-3


@pytest.mark.parametrize("make", [lambda r: GaussianCopula(r * 1.98 - 0.99),
                                  lambda r: GumbelCopula(1.0 + 49.0 * r)])
def test_inverse_conditional_round_trip(make, rng):
    for _ in range(50):
        cop = make(rng.random())
        z = rng.uniform(1e-4, 1 - 1e-4)
        t2 = rng.uniform(1e-4, 1 - 1e-4)
        t1 = cop.inverse_conditional(z, t2)
        assert cop.conditional_cdf(t1, t2) == pytest.approx(z, abs=1e-8)


def test_gumbel_inverse_independent_exponentials(rng):
    # eta = 1: the root equation collapses to u1 = -log z, i.e. t1 = z
    z = rng.uniform(0.01, 0.99, 50)
    t2 = rng.uniform(0.01, 0.99, 50)
    np.testing.assert_allclose(GumbelCopula(1.0).inverse_conditional(z, t2), z, atol=1e-10)


def test_tail_coefficients():
    assert GumbelCopula(1.0).tail_coefficients().upper == pytest.approx(0.0)
    tc = GumbelCopula(2.0).tail_coefficients()
    assert tc.upper == pytest.approx(2.0 - np.sqrt(2.0))
    assert tc.lower == 0.0
    tc = GaussianCopula(0.95).tail_coefficients()
    assert tc.upper == 0.0 and tc.lower == 0.0


def test_kendall_tau_links():
    assert gumbel_from_kendall_tau(0.5).eta == pytest.approx(2.0)
    assert gumbel_from_kendall_tau(0.0).eta == pytest.approx(1.0)
    assert gumbel_from_kendall_tau(0.98).eta == pytest.approx(50.0)  # cap binds
    with pytest.raises(ValueError):
        gumbel_from_kendall_tau(-0.1)
    # links invert each other inside the cap
    for tau in (0.0, 0.3, 0.6):
        assert gumbel_from_kendall_tau(tau).kendall_tau() == pytest.approx(tau)
    for tau in (-0.5, 0.0, 0.7):
        assert gaussian_from_kendall_tau(tau).kendall_tau() == pytest.approx(tau)


def test_empirical_kendall_tau_gumbel(rng):
    # validates the conditional-inverse sampler and the tau link together
    cop = GumbelCopula(2.0)
    t1, t2 = cop.sample_pair(rng, 1_000_000)
    tau = stats.kendalltau(t1, t2).statistic
    assert tau == pytest.approx(0.5, abs=0.005)


def test_exchangeability(rng):
    t1 = rng.uniform(1e-3, 1 - 1e-3, 100)
    t2 = rng.uniform(1e-3, 1 - 1e-3, 100)
    for cop in (GaussianCopula(0.7), GumbelCopula(3.5)):
        np.testing.assert_allclose(
            cop.density(t1, t2), cop.density(t2, t1), rtol=1e-12
        )


@pytest.mark.parametrize("cop", [GaussianCopula(0.6), GumbelCopula(2.0)])
def test_uniform_margins_by_quadrature(cop, rng):
    for t2 in rng.uniform(0.1, 0.9, size=3):
        total, _ = integrate.quad(lambda t1: cop.density(t1, t2), 0, 1, limit=200)
        assert total == pytest.approx(1.0, abs=1e-5)


def test_stochastically_increasing_in_conditioning_value():
    # conditional cdf nonincreasing in t2 for positive dependence
    t1_grid = np.linspace(0.05, 0.95, 10)
    t2_grid = np.linspace(0.05, 0.95, 12)
    for cop in (GaussianCopula(0.0), GaussianCopula(0.55), GaussianCopula(0.95),
                GumbelCopula(1.0), GumbelCopula(2.0), GumbelCopula(10.0)):
        for t1 in t1_grid:
            vals = cop.conditional_cdf(np.full_like(t2_grid, t1), t2_grid)
            assert np.all(np.diff(vals) <= 1e-12)


@settings(max_examples=60, deadline=None)
@given(
    eta=st.floats(1.0, 50.0),
    z=st.floats(1e-4, 1 - 1e-4),
    t2=st.floats(1e-4, 1 - 1e-4),
)
def test_gumbel_round_trip_property(eta, z, t2):
    cop = GumbelCopula(eta)
    t1 = cop.inverse_conditional(z, t2)
    assert abs(cop.conditional_cdf(t1, t2) - z) < 1e-8
