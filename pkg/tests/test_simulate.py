import numpy as np
import pytest
from scipy import integrate, stats

from nnmix.geo import build_reference
from nnmix.marginals import Beta, Gamma, SkewNormal
from nnmix.models import GaussianNNMP
from nnmix.simulate import (
    chi_coefficient,
    gaussian_field,
    simulate_beta_copula,
    simulate_nnmp,
    simulate_skew_gp,
    simulate_tcopula_gamma,
    unit_grid,
)
from nnmix.weights import WeightParams


def test_unit_grid_shape():
    g = unit_grid(20)
    assert g.shape == (400, 2)
    assert g.min() > 0 and g.max() < 1


def test_gaussian_field_covariance_probe(rng):
    # sample covariance across replicate pairs vs exp(-d/phi) at probe distances
    phi = 0.3
    probes = np.linspace(0.05, 0.9, 10)
    coords = np.vstack([[0.0, 0.0]] + [[d, 0.0] for d in probes])
    reps = 10_000
    z = gaussian_field(coords, phi, rng, n_reps=reps)
    for j, d in enumerate(probes, start=1):
        est = np.mean(z[:, 0] * z[:, j])
        se = np.std(z[:, 0] * z[:, j]) / np.sqrt(reps)
        assert abs(est - np.exp(-d / phi)) < 4 * se


def test_gaussian_field_rejects_oversized(rng):
    with pytest.raises(ValueError, match="capped"):
        gaussian_field(np.zeros((6001, 2)), 0.1, rng)


def test_nnmp_iid_limit(rng):
    # rho == 0 everywhere: the field is iid from the stationary marginal
    coords = rng.random((400, 2))
    ref = build_reference(coords, L=5, ordering="random", seed=0)
    spec = GaussianNNMP(mu=0.8, sigma2=1.5, phi=1e-9)
    wp = WeightParams(gamma=(0.0, 0.0, 0.0), kappa2=1.0, zeta=0.2)
    fr = simulate_nnmp(spec, ref, wp, seed=5)
    p = stats.kstest(fr.values, stats.norm(0.8, np.sqrt(1.5)).cdf).pvalue
    assert p > 0.005


def test_nnmp_stationary_marginal_pooled(rng):
    # invariant condition: pooled single-site marginals over replicates
    coords = rng.random((2000, 2))
    ref = build_reference(coords, L=10, ordering="random", seed=1)
    spec = GaussianNNMP(mu=0.0, sigma2=1.0, phi=0.2)
    wp = WeightParams(gamma=(-1.5, 0.0, 0.0), kappa2=1.0, zeta=0.1)
    z = simulate_nnmp(spec, ref, wp, seed=2, n_reps=500).values
    # one site per replicate avoids within-field dependence in the KS test
    sites = rng.integers(0, 2000, size=500)
    pooled = z[np.arange(500), sites]
    assert stats.kstest(pooled, stats.norm(0.0, 1.0).cdf).pvalue > 0.005
    # and the last site (deepest in the DAG) over replicates
    assert stats.kstest(z[:, -1], stats.norm(0.0, 1.0).cdf).pvalue > 0.005


def test_nnmp_deterministic_under_seed(rng):
    coords = rng.random((100, 2))
    ref = build_reference(coords, L=4, ordering="random", seed=7)
    spec = GaussianNNMP(mu=0.0, sigma2=1.0, phi=0.2)
    wp = WeightParams(gamma=(-1.0, 0.0, 0.0), kappa2=1.0, zeta=0.1)
    a = simulate_nnmp(spec, ref, wp, seed=42).values
    b = simulate_nnmp(spec, ref, wp, seed=42).values
    np.testing.assert_array_equal(a, b)


def test_tcopula_gamma_marginal(rng):
    coords = rng.random((400, 2))
    pooled = []
    for k in range(40):
        fr = simulate_tcopula_gamma(coords, nu=10, phi_w=1 / 12, a0=2, b0=2, seed=100 + k)
        pooled.append(fr.values[k])
    pooled = np.asarray(pooled)
    assert stats.kstest(pooled, Gamma(2.0, 2.0).cdf).pvalue > 0.005
    fr = simulate_tcopula_gamma(coords, nu=10, seed=0)
    assert np.all(fr.values > 0)


def test_tcopula_pair_tail_dependence(rng):
    # a single pair at rho0 = 0.95: the exceedance at q = 0.995 sits at its
    # exact pre-asymptotic value (0.6941 by quadrature of the bivariate t
    # conditional); the 0.61 asymptote is only reached as q -> 1 and is
    # checked through chi_coefficient instead
    rho0 = 0.95
    phi_w = 1.0
    d = -np.log(rho0) * phi_w
    coords = np.array([[0.0, 0.0], [d, 0.0]])
    n = 400_000
    g = gaussian_field(coords, phi_w, rng, n_reps=n)
    w = rng.chisquare(10, size=(n, 1)) / 10
    t = stats.t(10).cdf(g / np.sqrt(w))
    q = 0.995
    n_cond = np.count_nonzero(t[:, 1] > q)
    cond = np.count_nonzero((t[:, 0] > q) & (t[:, 1] > q)) / n_cond
    exact = 0.6940862246838756
    se = np.sqrt(exact * (1 - exact) / n_cond)
    assert cond == pytest.approx(exact, abs=4 * se)
    assert chi_coefficient(10, rho0) == pytest.approx(0.61, abs=0.005)


def test_tcopula_gaussian_limit(rng):
    coords = rng.random((50, 2))
    fr = simulate_tcopula_gamma(coords, nu=None, seed=3)
    assert fr.generator == "gausscopula-gamma"
    fr2 = simulate_tcopula_gamma(coords, nu=np.inf, seed=3)
    np.testing.assert_array_equal(fr.values, fr2.values)


def test_skew_gp_marginals(rng):
    coords = rng.random((300, 2))
    strong = []
    neg = []
    for k in range(30):
        strong.append(simulate_skew_gp(coords, 10.0, 1.0, seed=k).values)
        neg.append(simulate_skew_gp(coords, -5.0, 1.0, seed=k).values)
    strong = np.concatenate(strong)
    neg = np.concatenate(neg)
    assert stats.skew(strong) > 0.9
    assert stats.skew(neg) < 0
    # sigma1 = 0 gives a plain Gaussian field
    flat = simulate_skew_gp(coords, 0.0, 1.0, seed=1).values
    assert stats.kstest(flat, stats.norm(0, 1).cdf).pvalue > 0.005
    # pooled one-site-per-replicate draws match the stated skew-normal marginal
    sn = SkewNormal(0.0, 10.0**2 + 1.0, 10.0)
    sites = rng.integers(0, 300, size=30)
    pooled = np.array([simulate_skew_gp(coords, 10.0, 1.0, seed=500 + k).values[s]
                       for k, s in enumerate(sites)])
    assert stats.kstest(pooled, sn.cdf).pvalue > 0.005


def test_beta_copula_field(rng):
    coords = rng.random((500, 2))
    vals = simulate_beta_copula(coords, 3.0, 6.0, phi=0.1, seed=0).values
    assert np.all((vals > 0) & (vals < 1))
    pooled = np.array([
        simulate_beta_copula(coords, 3.0, 6.0, phi=0.1, seed=k).values[k] for k in range(60)
    ])
    assert stats.kstest(pooled, Beta(3.0, 6.0).cdf).pvalue > 0.005


def test_beta_copula_correlogram(rng):
    # empirical Gaussian-scale correlation at distance = range is about e^-1
    d = 0.1
    coords = np.array([[0.0, 0.0], [d, 0.0]])
    reps = 30_000
    g = gaussian_field(coords, 0.1, rng, n_reps=reps)
    vals = stats.norm.cdf(g)
    y = stats.beta(3, 6).ppf(vals)
    # transform back through the marginal: correlation on the latent scale
    z = stats.norm.ppf(stats.beta(3, 6).cdf(y))
    est = np.mean(z[:, 0] * z[:, 1])
    se = np.std(z[:, 0] * z[:, 1]) / np.sqrt(reps)
    assert abs(est - np.exp(-1.0)) < 4 * se


def test_chi_coefficient_values():
    # tail-dependence table for the nu=10 field
    assert chi_coefficient(10, 0.05) == pytest.approx(0.01, abs=0.005)
    assert chi_coefficient(10, 0.5) == pytest.approx(0.08, abs=0.005)
    assert chi_coefficient(10, 0.95) == pytest.approx(0.61, abs=0.005)
    assert round(float(chi_coefficient(10, 0.05)), 2) == 0.01
    assert round(float(chi_coefficient(10, 0.5)), 2) == 0.08
    assert round(float(chi_coefficient(10, 0.95)), 2) == 0.61


def test_chi_coefficient_limit():
    assert chi_coefficient(10, 1 - 1e-12) == pytest.approx(1.0, abs=1e-5)


def test_chi_coefficient_against_quadrature_oracle():
    # independent t-cdf evaluation by integrating the density
    from scipy.special import gammaln

    for nu, rho0 in [(10.0, 0.5), (4.0, 0.8), (25.0, 0.1)]:
        arg = -np.sqrt((1 + nu) * (1 - rho0) / (1 + rho0))
        dfree = nu + 1
        logc = gammaln((dfree + 1) / 2) - gammaln(dfree / 2) - 0.5 * np.log(dfree * np.pi)

        def tpdf(x, dfree=dfree, logc=logc):
            return np.exp(logc - (dfree + 1) / 2 * np.log1p(x * x / dfree))

        ref, _ = integrate.quad(tpdf, -np.inf, arg, limit=300)
        assert chi_coefficient(nu, rho0) == pytest.approx(2 * ref, abs=1e-8)


def test_chi_coefficient_validates():
    with pytest.raises(ValueError):
        chi_coefficient(-1, 0.5)
    with pytest.raises(ValueError):
        chi_coefficient(10, 1.0)
