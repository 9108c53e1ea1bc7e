import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nnmix.weights import (
    WeightParams,
    cutoff_points,
    kernel_weights,
    latent_bin,
    logit_cutoffs,
    logit_gaussian_weights,
    site_weights,
)


def test_single_neighbor_full_bin():
    r = cutoff_points(np.array([0.3]), zeta=0.5)
    np.testing.assert_allclose(r, [0.0, 1.0])


def test_equal_distances_split_evenly():
    r = cutoff_points(np.array([0.4, 0.4]), zeta=0.2)
    np.testing.assert_allclose(r, [0.0, 0.5, 1.0])


def test_kernel_ratio_increments():
    d = 0.37
    r = cutoff_points(np.array([d, 2 * d]), zeta=d)
    inc = np.diff(r)
    expect = np.array([np.exp(-1.0), np.exp(-2.0)])
    expect /= expect.sum()
    np.testing.assert_allclose(inc, expect, atol=1e-12)
    assert inc[0] == pytest.approx(0.73105857863, abs=1e-9)


def test_cutoffs_strictly_increasing(rng):
    d = rng.uniform(0.01, 1.0, size=8)
    r = cutoff_points(d, zeta=0.15)
    assert r[0] == 0.0 and r[-1] == 1.0
    assert np.all(np.diff(r) > 0)


def test_underflow_falls_back_to_equal_increments():
    d = np.array([800.0, 900.0, 1000.0])
    with pytest.warns(UserWarning, match="underflow"):
        r = cutoff_points(d, zeta=1e-3)
    np.testing.assert_allclose(np.diff(r), 1.0 / 3.0)


def test_uniform_g_weights_are_kernel_increments(rng):
    d = rng.uniform(0.05, 0.6, size=6)
    w = kernel_weights(d, zeta=0.2)
    np.testing.assert_allclose(w, np.diff(cutoff_points(d, 0.2)))
    params = WeightParams(gamma=(-1.0, 0.0, 0.0), kappa2=1.0, zeta=0.2)
    w2 = site_weights(params, np.array([0.5, 0.5]), d, uniform=True)
    np.testing.assert_allclose(w2, w)


def test_symmetric_two_bin_weights():
    # equal cutoffs at 0.5 and a centered logit-Gaussian put half the mass in each
    rstar = logit_cutoffs(np.array([0.0, 0.5, 1.0]))
    w = logit_gaussian_weights(rstar, mu=np.array(0.0), kappa2=1.0)
    np.testing.assert_allclose(w, [0.5, 0.5], atol=1e-12)


def test_weights_sum_to_one_and_nonnegative(rng):
    for _ in range(20):
        d = rng.uniform(0.01, 1.0, size=rng.integers(1, 12))
        params = WeightParams(
            gamma=tuple(rng.normal(size=3)), kappa2=rng.uniform(0.2, 3.0), zeta=rng.uniform(0.05, 0.5)
        )
        w = site_weights(params, rng.random(2), d)
        assert np.all(w >= 0)
        assert np.sum(w) == pytest.approx(1.0, abs=1e-12)


def test_weights_match_quadrature_oracle():
    # numeric integration of the logit-Gaussian density over each bin
    d = np.linspace(0.05, 0.5, 10)
    mu, kappa2 = -3.0, 1.0
    r = cutoff_points(d, zeta=0.2)
    rstar = logit_cutoffs(r)
    w = logit_gaussian_weights(rstar, np.array(mu), kappa2)

    def logit_gaussian_pdf(t):
        x = np.log(t / (1 - t))
        return (
            np.exp(-0.5 * (x - mu) ** 2 / kappa2)
            / np.sqrt(2 * np.pi * kappa2)
            / (t * (1 - t))
        )

    for l in range(10):
        ref, _ = integrate.quad(logit_gaussian_pdf, r[l], r[l + 1], limit=300)
        assert w[l] == pytest.approx(ref, abs=1e-8)
    # mass shifted toward near neighbors for small mu
    assert np.all(np.diff(w) < 0)


def test_low_mean_favors_near_neighbors_monotonically():
    d = np.linspace(0.05, 0.5, 8)
    r = cutoff_points(d, zeta=0.2)
    rstar = logit_cutoffs(r)
    w_small = logit_gaussian_weights(rstar, np.array(-2.0), 1.0)
    w_large = logit_gaussian_weights(rstar, np.array(2.0), 1.0)
    # larger mu pushes the weight cdf down (stochastically larger bin index)
    assert np.all(np.cumsum(w_large) <= np.cumsum(w_small) + 1e-12)


def test_weights_match_monte_carlo_bins(rng):
    d = np.array([0.1, 0.2, 0.3, 0.4])
    r = cutoff_points(d, zeta=0.15)
    rstar = logit_cutoffs(r)
    w = logit_gaussian_weights(rstar, np.array(0.0), 1.0)
    draws = rng.normal(0.0, 1.0, size=1_000_000)
    g = 1.0 / (1.0 + np.exp(-draws))  # logit-Gaussian variates
    counts = np.histogram(g, bins=r)[0] / draws.shape[0]
    se = np.sqrt(w * (1 - w) / draws.shape[0])
    assert np.all(np.abs(counts - w) < 3 * se + 1e-9)


def test_latent_bin_boundaries():
    rstar = logit_cutoffs(np.array([0.0, 0.25, 0.5, 1.0]))
    assert latent_bin(-1e30, rstar) == 0
    assert latent_bin(1e30, rstar) == 2
    # exactly at an interior cutoff: lower bin by the half-open convention
    assert latent_bin(rstar[1], rstar) == 0
    assert latent_bin(rstar[2], rstar) == 1


def test_latent_bin_matches_linear_scan(rng):
    d = rng.uniform(0.05, 0.8, size=7)
    rstar = logit_cutoffs(cutoff_points(d, 0.2))
    for t in rng.normal(scale=3.0, size=200):
        brute = 0
        for l in range(1, 7):
            if t > rstar[l]:
                brute = l
        assert latent_bin(t, rstar) == brute


def test_padded_rows_get_zero_mass_bins():
    d = np.array([[0.1, 0.3, np.inf, np.inf], [0.2, 0.25, 0.4, 0.5]])
    counts = np.array([2, 4])
    r = cutoff_points(d, zeta=0.2)
    rstar = logit_cutoffs(r, counts=counts)
    w = logit_gaussian_weights(rstar, np.array([0.0, 0.0]), 1.0)
    assert np.all(w[0, 2:] == 0.0)
    assert w[0, :2].sum() == pytest.approx(1.0)
    assert np.all(w[1] > 0)
    # the last real bin extends to +inf
    assert rstar[0, 2] == np.inf and rstar[0, 3] == np.inf


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 100000),
    nbins=st.integers(1, 10),
    mu=st.floats(-4, 4),
    kappa2=st.floats(0.1, 5.0),
)
def test_weights_partition_property(seed, nbins, mu, kappa2):
    r = np.random.default_rng(seed)
    d = r.uniform(0.01, 1.0, size=nbins)
    w = logit_gaussian_weights(logit_cutoffs(cutoff_points(d, 0.2)), np.array(mu), kappa2)
    assert w.shape == (nbins,)
    assert np.all(w >= 0) and np.all(w <= 1)
    assert abs(w.sum() - 1.0) < 1e-9
