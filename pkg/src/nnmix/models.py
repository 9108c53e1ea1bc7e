"""Nearest-neighbor mixture process model families.

Each family specifies the per-neighbor transition density f_l(z | z_nbr)
through a bivariate base distribution whose dependence parameter is indexed
by the site-to-neighbor distance:

* ``GaussianNNMP``: bivariate normal components, correlation exp(-d/phi).
* ``SkewGaussianNNMP``: bivariate skew-normal components via a shared
  half-normal location mixer; the marginalized closed form is used for
  likelihood evaluation, the latent form only for sampling.
* ``ExtSkewGaussianNNMP``: skew-normal components with a regression location
  and a piecewise-constant (partitioned) skewness field.
* ``CopulaNNMP``: Gaussian or Gumbel copula components with an arbitrary
  continuous stationary marginal (gamma and beta are the supported fits).
* ``LomaxNNMP``: heavy-tailed Lomax conditionals; density and tail-bound
  machinery only, no fitted sampler.

All mixture arithmetic is done in log space with log-sum-exp; copula
densities near the tails are far outside double range otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import integrate, special
from scipy.linalg import solve_triangular

from . import copulas
from .geo import SiteSet
from .marginals import Beta, Gamma, Normal, SkewNormal, truncnorm_sample
from .weights import WeightParams, site_weights

_LOG_2PI = np.log(2.0 * np.pi)
_RHO_MAX = 1.0 - 1e-12


def rho_from_distance(phi, d):
    """Exponential correlation exp(-d/phi), clipped just below 1."""
    return np.minimum(np.exp(-np.asarray(d, dtype=float) / phi), _RHO_MAX)


def gumbel_eta_from_distance(phi, d):
    """Gumbel parameter via the Kendall-tau link with exponential kernel.

    eta(d) = min{(1 - exp(-d/phi))^-1, cap}; the cap binds at short range,
    freezing the strength of component tail dependence below that distance.
    """
    tau = np.exp(-np.asarray(d, dtype=float) / phi)
    with np.errstate(divide="ignore"):
        eta = 1.0 / np.maximum(1.0 - tau, 0.0)
    return np.minimum(eta, copulas.GUMBEL_ETA_CAP)


@dataclass(frozen=True)
class GaussianNNMP:
    mu: float
    sigma2: float
    phi: float

    def __post_init__(self):
        if not (self.sigma2 > 0 and self.phi > 0):
            raise ValueError("sigma2 and phi must be positive")


@dataclass(frozen=True)
class SkewGaussianNNMP:
    lam: float
    sigma2: float
    phi: float
    xi: float = 0.0

    def __post_init__(self):
        if not (self.sigma2 > 0 and self.phi > 0):
            raise ValueError("sigma2 and phi must be positive")


@dataclass(frozen=True)
class ExtSkewGaussianNNMP:
    """Skew-normal mixture with regression location and partitioned skewness.

    ``beta`` multiplies the design (1, x, y); ``lambdas[k]`` is the skewness
    in partition k. The partition map (site -> label) is data, supplied by
    the caller alongside coordinates.
    """

    beta: tuple[float, float, float]
    lambdas: tuple[float, ...]
    sigma2: float
    phi: float

    def __post_init__(self):
        if not (self.sigma2 > 0 and self.phi > 0):
            raise ValueError("sigma2 and phi must be positive")

    def xb(self, coords):
        coords = np.asarray(coords, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        return b[0] + b[1] * coords[..., 0] + b[2] * coords[..., 1]

    def lam_of(self, labels):
        return np.asarray(self.lambdas, dtype=float)[np.asarray(labels)]


@dataclass(frozen=True)
class CopulaNNMP:
    copula: Literal["gaussian", "gumbel"]
    marginal: Gamma | Beta
    phi: float

    def __post_init__(self):
        if self.copula not in ("gaussian", "gumbel"):
            raise ValueError("copula must be 'gaussian' or 'gumbel'")
        if not self.phi > 0:
            raise ValueError("phi must be positive")


@dataclass(frozen=True)
class LomaxNNMP:
    """Per-component Lomax shifts and shapes at a given site."""

    phis: tuple[float, ...]
    alphas: tuple[float, ...]

    def __post_init__(self):
        if len(self.phis) != len(self.alphas):
            raise ValueError("phis and alphas must have equal length")
        if any(p <= 0 for p in self.phis) or any(a <= 0 for a in self.alphas):
            raise ValueError("Lomax shifts and shapes must be positive")


ModelSpec = GaussianNNMP | SkewGaussianNNMP | ExtSkewGaussianNNMP | CopulaNNMP | LomaxNNMP


def stationary_marginal(spec):
    """The common marginal every site inherits under the invariant condition."""
    if isinstance(spec, GaussianNNMP):
        return Normal(spec.mu, spec.sigma2)
    if isinstance(spec, SkewGaussianNNMP):
        om2 = spec.lam**2 + spec.sigma2
        return SkewNormal(spec.xi, om2, spec.lam / np.sqrt(spec.sigma2))
    if isinstance(spec, CopulaNNMP):
        return spec.marginal
    raise ValueError(f"{type(spec).__name__} has no single stationary marginal")


# ---------------------------------------------------------------------------
# component log densities

def gaussian_component_logpdf(mu, sigma2, rho, value, nbr_value):
    v = sigma2 * (1.0 - rho * rho)
    resid = value - (1.0 - rho) * mu - rho * nbr_value
    return -0.5 * (np.log(v) + _LOG_2PI) - resid * resid / (2.0 * v)


def skew_component_logpdf(xi, lam, sigma2, rho, value, nbr_value):
    """Marginalized skew component: tilted normal around the shrunk neighbor."""
    om2 = sigma2 + lam * lam
    rho_t = (rho * sigma2 + lam * lam) / om2
    u = value - xi
    v = nbr_value - xi
    s2 = (1.0 + rho) * sigma2
    a_p = lam / np.sqrt(s2)
    om_p = np.sqrt(s2 + 2.0 * lam * lam)
    var = om2 * (1.0 - rho_t * rho_t)
    resid = u - rho_t * v
    log_norm = -0.5 * (np.log(var) + _LOG_2PI) - resid * resid / (2.0 * var)
    log_b = special.log_ndtr(a_p * (u + v) / om_p) - special.log_ndtr(
        lam * v / (np.sqrt(om2) * np.sqrt(sigma2))
    )
    return log_norm + log_b


def extskew_component_logpdf(sigma2, rho, value, nbr_value, xb_v, xb_nbr, lam_v, lam_nbr):
    """Skew component with regression location and per-site skewness."""
    om2_v = lam_v * lam_v + sigma2
    om2_n = lam_nbr * lam_nbr + sigma2
    u = value - xb_v
    v = nbr_value - xb_nbr
    gam = (rho * sigma2 + lam_v * lam_nbr) / om2_n
    var = om2_v - (rho * sigma2 + lam_v * lam_nbr) ** 2 / om2_n
    s2 = (1.0 + rho) * sigma2
    m = np.sqrt((1.0 - rho) * s2) * np.sqrt(
        (1.0 - rho) * s2 + lam_v * lam_v + lam_nbr * lam_nbr - 2.0 * rho * lam_v * lam_nbr
    )
    a1 = (lam_v - rho * lam_nbr) / m
    a2 = (lam_nbr - rho * lam_v) / m
    resid = u - gam * v
    log_norm = -0.5 * (np.log(var) + _LOG_2PI) - resid * resid / (2.0 * var)
    log_b = special.log_ndtr(a1 * u + a2 * v) - special.log_ndtr(
        lam_nbr * v / (np.sqrt(om2_n) * np.sqrt(sigma2))
    )
    return log_norm + log_b


def copula_component_logpdf_from_u(kind, par, u_value, u_nbr, log_fz_value):
    """Copula component from precomputed probability-integral transforms."""
    if kind == "gaussian":
        logc = copulas.gaussian_logdensity(par, u_value, u_nbr)
    else:
        logc = copulas.gumbel_logdensity(par, u_value, u_nbr)
    return logc + log_fz_value


def lomax_component_logpdf(phi_l, alpha_l, value, nbr_value):
    scale = nbr_value + phi_l
    x = np.asarray(value, dtype=float)
    out = np.log(alpha_l) - np.log(scale) - (alpha_l + 1.0) * np.log1p(np.maximum(x, 0.0) / scale)
    return np.where(x >= 0, out, -np.inf)


def component_logdensity(spec, value, nbr_value, dist, l=0):
    """Log f_l(value | nbr_value) for neighbor at distance ``dist``.

    Out-of-support values yield -inf rather than an error. The extended skew
    family needs covariates and partition labels; use
    :func:`extskew_component_logpdf` directly for it.
    """
    value = np.asarray(value, dtype=float)
    nbr_value = np.asarray(nbr_value, dtype=float)
    if isinstance(spec, GaussianNNMP):
        rho = rho_from_distance(spec.phi, dist)
        return gaussian_component_logpdf(spec.mu, spec.sigma2, rho, value, nbr_value)
    if isinstance(spec, SkewGaussianNNMP):
        rho = rho_from_distance(spec.phi, dist)
        return skew_component_logpdf(spec.xi, spec.lam, spec.sigma2, rho, value, nbr_value)
    if isinstance(spec, CopulaNNMP):
        fz = spec.marginal
        par = (
            rho_from_distance(spec.phi, dist)
            if spec.copula == "gaussian"
            else gumbel_eta_from_distance(spec.phi, dist)
        )
        with np.errstate(invalid="ignore"):
            out = copula_component_logpdf_from_u(
                spec.copula, par, fz.cdf(value), fz.cdf(nbr_value), fz.logpdf(value)
            )
        lo, hi = fz.support
        return np.where((value > lo) & (value < hi), out, -np.inf)
    if isinstance(spec, LomaxNNMP):
        return lomax_component_logpdf(spec.phis[l], spec.alphas[l], value, nbr_value)
    raise TypeError(f"unsupported model spec {type(spec).__name__}")


def conditional_logdensity(spec, w, value, nbr_values, dists):
    """Log of the mixture conditional: logsumexp over weighted components."""
    w = np.asarray(w, dtype=float)
    nbr_values = np.asarray(nbr_values, dtype=float)
    dists = np.asarray(dists, dtype=float)
    if w.shape != nbr_values.shape:
        raise ValueError("weights and neighbor values must align")
    value = np.asarray(value, dtype=float)[..., None]
    if isinstance(spec, LomaxNNMP):
        logf = np.stack(
            [
                lomax_component_logpdf(spec.phis[l], spec.alphas[l], value[..., 0], nbr_values[l])
                for l in range(w.shape[-1])
            ],
            axis=-1,
        )
    else:
        logf = component_logdensity(spec, value, nbr_values, dists)
    with np.errstate(divide="ignore"):
        return special.logsumexp(logf + np.log(w), axis=-1)


# ---------------------------------------------------------------------------
# component samplers

def sample_component(spec, nbr_value, dist, rng, labels=None, coords=None, nbr_labels=None,
                     nbr_coords=None, l=0):
    """One draw from component l given the neighbor value.

    Vectorized over broadcastable ``nbr_value`` / ``dist`` arrays. For the
    extended skew family, per-draw coordinates and partition labels of both
    endpoints are required.
    """
    nbr_value = np.asarray(nbr_value, dtype=float)
    dist = np.asarray(dist, dtype=float)
    if isinstance(spec, GaussianNNMP):
        rho = np.exp(-dist / spec.phi)
        mean = (1.0 - rho) * spec.mu + rho * nbr_value
        sd = np.sqrt(spec.sigma2 * (1.0 - rho * rho))
        return mean + sd * rng.standard_normal(np.broadcast(nbr_value, dist).shape)
    if isinstance(spec, SkewGaussianNNMP):
        rho = np.exp(-dist / spec.phi)
        lam, sig2, xi = spec.lam, spec.sigma2, spec.xi
        mu0 = (nbr_value - xi) * lam / (sig2 + lam * lam)
        s0 = np.sqrt(sig2 / (sig2 + lam * lam))
        z0 = truncnorm_sample(rng, mu0, s0, 0.0, np.inf)
        mean = (1.0 - rho) * (xi + lam * z0) + rho * nbr_value
        sd = np.sqrt(sig2 * (1.0 - rho * rho))
        return mean + sd * rng.standard_normal(np.shape(mean))
    if isinstance(spec, ExtSkewGaussianNNMP):
        rho = np.exp(-dist / spec.phi)
        sig2 = spec.sigma2
        xb_v = spec.xb(coords)
        xb_n = spec.xb(nbr_coords)
        lam_v = spec.lam_of(labels)
        lam_n = spec.lam_of(nbr_labels)
        mu0 = (nbr_value - xb_n) * lam_n / (sig2 + lam_n * lam_n)
        s0 = np.sqrt(sig2 / (sig2 + lam_n * lam_n))
        z0 = truncnorm_sample(rng, mu0, s0, 0.0, np.inf)
        mean = xb_v + lam_v * z0 + rho * (nbr_value - xb_n - lam_n * z0)
        sd = np.sqrt(sig2 * (1.0 - rho * rho))
        return mean + sd * rng.standard_normal(np.shape(mean))
    if isinstance(spec, CopulaNNMP):
        fz = spec.marginal
        t2 = fz.cdf(nbr_value)
        z = rng.random(np.broadcast(nbr_value, dist).shape)
        if spec.copula == "gaussian":
            rho = rho_from_distance(spec.phi, dist)
            t1 = copulas.gaussian_inverse_conditional(rho, z, t2)
        else:
            eta = gumbel_eta_from_distance(spec.phi, dist)
            t1 = copulas.gumbel_inverse_conditional(eta, z, t2)
        return fz.quantile(np.clip(t1, copulas.CLAMP_EPS, 1.0 - copulas.CLAMP_EPS))
    if isinstance(spec, LomaxNNMP):
        u = rng.random(np.shape(nbr_value))
        scale = nbr_value + spec.phis[l]
        return scale * np.expm1(-np.log1p(-u) / spec.alphas[l])
    raise TypeError(f"unsupported model spec {type(spec).__name__}")


# ---------------------------------------------------------------------------
# stationarity (invariant-condition) check

def stationarity_defect(spec, dist, u_grid=None, quad_tol=1e-9):
    """Sup over a grid of |integral f(u|v) f_Z(v) dv - f_Z(u)|.

    Under the invariant condition the transition kernel leaves the marginal
    f_Z unchanged; the returned defect is quadrature noise for a correct
    family. ``dist`` fixes the component's dependence parameter.
    """
    fz = stationary_marginal(spec)
    lo, hi = fz.support
    if u_grid is None:
        u_grid = fz.quantile(np.linspace(0.02, 0.98, 21))
    worst = 0.0
    for u in np.atleast_1d(u_grid):
        def integrand(v, u=u):
            return np.exp(component_logdensity(spec, u, v, dist) + fz.logpdf(v))

        val, _ = integrate.quad(integrand, lo, hi, epsabs=quad_tol, epsrel=quad_tol, limit=200)
        worst = max(worst, abs(val - fz.pdf(u)))
    return worst


# ---------------------------------------------------------------------------
# Gaussian joint mixture (explicit finite-dimensional distribution)

@dataclass(frozen=True)
class GaussianMixtureJoint:
    """Explicit mixture of multivariate normals over a small reference set."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def logpdf(self, z):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        n = z.shape[1]
        out = np.full((self.weights.shape[0], z.shape[0]), -np.inf)
        for k in range(self.weights.shape[0]):
            chol = np.linalg.cholesky(self.covs[k])
            sol = solve_triangular(chol, (z - self.means[k]).T, lower=True)
            quad = np.sum(sol * sol, axis=0)
            logdet = 2.0 * np.sum(np.log(np.diag(chol)))
            out[k] = -0.5 * (n * _LOG_2PI + logdet + quad) + np.log(self.weights[k])
        return special.logsumexp(out, axis=0)

    def pdf(self, z):
        return np.exp(self.logpdf(z))


def gaussian_joint_mixture(spec: GaussianNNMP, ref: SiteSet, wparams: WeightParams,
                           max_components=5000):
    """Enumerate the joint distribution of a stationary Gaussian mixture field.

    Every assignment of one parent per site yields a linear-Gaussian chain,
    hence a multivariate normal component; weights multiply across sites.
    Component count is the product of neighbor-set sizes, so this is only
    for small reference sets (the count is reported when refusing).
    """
    n = ref.n
    counts = [int(ref.nbr_count[i]) for i in range(n)]
    total = 1
    for i in range(1, n):
        total *= counts[i]
    if total > max_components:
        raise ValueError(
            f"joint mixture would need {total} components (> {max_components}); "
            "reduce n or L"
        )
    w_site = [None] * n
    for i in range(1, n):
        c = counts[i]
        w_site[i] = site_weights(
            wparams, ref.coords[i], ref.nbr_dist[i, :c]
        )
    rho_site = [None] * n
    for i in range(1, n):
        c = counts[i]
        rho_site[i] = rho_from_distance(spec.phi, ref.nbr_dist[i, :c])

    sigma2, mu = spec.sigma2, spec.mu
    combos = [[]]
    for i in range(1, n):
        combos = [c + [l] for c in combos for l in range(counts[i])]
    weights, means, covs = [], [], []
    for combo in combos:
        a = np.zeros((n, n))
        d = np.zeros(n)
        d[0] = sigma2
        wgt = 1.0
        for i in range(1, n):
            l = combo[i - 1]
            parent = ref.nbr_idx[i, l]
            rho = rho_site[i][l]
            a[i, parent] = rho
            d[i] = sigma2 * (1.0 - rho * rho)
            wgt *= w_site[i][l]
        m = np.linalg.inv(np.eye(n) - a)
        cov = m @ np.diag(d) @ m.T
        weights.append(wgt)
        means.append(np.full(n, mu))
        covs.append(cov)
    return GaussianMixtureJoint(
        weights=np.asarray(weights), means=np.asarray(means), covs=np.asarray(covs)
    )


# ---------------------------------------------------------------------------
# covariance recursion (stationary Gaussian family)

def covariance_recursion(spec: GaussianNNMP, ref: SiteSet, wparams: WeightParams):
    """Centered covariance matrix over the reference set via the mixture recursion.

    cov(Z_i, Z_j) for i > j is the weight-averaged, correlation-scaled
    covariance between the parents of i and Z_j; the base case is the
    stationary variance on the diagonal.
    """
    n = ref.n
    sigma2 = spec.sigma2
    cov = np.zeros((n, n))
    cov[0, 0] = sigma2
    for i in range(1, n):
        c = int(ref.nbr_count[i])
        w = site_weights(wparams, ref.coords[i], ref.nbr_dist[i, :c])
        rho = rho_from_distance(spec.phi, ref.nbr_dist[i, :c])
        parents = ref.nbr_idx[i, :c]
        cov[i, :i] = (w * rho) @ cov[parents, :i]
        cov[:i, i] = cov[i, :i]
        cov[i, i] = sigma2
    return cov


def covariance_query(spec: GaussianNNMP, ref: SiteSet, wparams: WeightParams,
                     query, ref_cov=None):
    """Covariances cov(Z(q), Z_j) over reference sites for a non-reference q."""
    from .geo import neighbors_of_query

    if ref_cov is None:
        ref_cov = covariance_recursion(spec, ref, wparams)
    q = neighbors_of_query(ref, query)
    w = site_weights(wparams, q.coords, q.nbr_dist)
    rho = rho_from_distance(spec.phi, q.nbr_dist)
    return (w * rho) @ ref_cov[q.nbr_idx, :]


# ---------------------------------------------------------------------------
# tail-dependence lower bounds

@dataclass(frozen=True)
class TailBounds:
    """Lower bounds for the tail coefficients and boundary masses at a site.

    ``lower`` / ``upper`` bound the lower/upper tail-dependence coefficients
    of the site given its neighbors; ``p0`` / ``p1`` bound the point masses
    of the boundary conditional distribution at the extremes. Fields are NaN
    when the family supplies no bound; ``supported`` is False when the family
    has no known per-component tail behavior at all.
    """

    lower: float
    upper: float
    p0: float
    p1: float
    supported: bool = True
    note: str = ""


def tail_lower_bounds(spec, w, dists):
    """Convex-combination tail bounds from per-component coefficients."""
    w = np.asarray(w, dtype=float)
    dists = np.asarray(dists, dtype=float)
    if isinstance(spec, CopulaNNMP) and spec.copula == "gumbel":
        eta = gumbel_eta_from_distance(spec.phi, dists)
        lam_h = 2.0 - 2.0 ** (1.0 / eta)
        return TailBounds(
            lower=0.0,
            upper=float(np.sum(w * lam_h) / 2.0),
            p0=0.0,
            p1=float(np.sum(w * lam_h)),
            note="component upper-tail coefficients 2 - 2^(1/eta)",
        )
    if isinstance(spec, CopulaNNMP) and spec.copula == "gaussian":
        return TailBounds(0.0, 0.0, 0.0, 0.0, note="Gaussian copula components are tail independent")
    if isinstance(spec, GaussianNNMP):
        return TailBounds(0.0, 0.0, 0.0, 0.0, note="bivariate normal components are tail independent")
    if isinstance(spec, LomaxNNMP):
        alphas = np.asarray(spec.alphas, dtype=float)
        if w.shape != alphas.shape:
            raise ValueError("weights must align with per-component shapes")
        bound = float(np.sum(w * np.exp2(-alphas)))
        return TailBounds(
            lower=np.nan,
            upper=bound,
            p0=np.nan,
            p1=np.nan,
            note="survival-limit bound sum w_l 2^(-alpha_l); boundary masses not available",
        )
    return TailBounds(
        np.nan, np.nan, np.nan, np.nan, supported=False,
        note=f"no tail bound available for {type(spec).__name__}",
    )
