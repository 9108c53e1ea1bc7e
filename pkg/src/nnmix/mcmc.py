"""Data-augmented posterior samplers for the mixture process families.

One Gibbs scan is: a joint draw of the latent selector variables (the
component label of every modeled site together with its latent Gaussian
``t``), conjugate draws for the weight-model coefficients ``gamma`` and
variance ``kappa2``, a collapsed random-walk Metropolis step for the cutoff
range ``zeta`` (the latent ``t`` are integrated out and not reused until
they are redrawn at the top of the next scan), and family-specific updates
for the component parameters. Conjugate updates are exact; everything else
is random-walk Metropolis, on the log scale for positive parameters, with
optional Robbins-Monro step adaptation during burn-in only.

The likelihood is conditional on the first ``L`` ordered sites for the
stationary families; the regression family instead models every site's
latent effect and conditions its selector variables on the first two sites.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy import special

from .copulas import gaussian_logdensity, gumbel_logdensity
from .geo import SiteSet
from .marginals import Beta, Gamma, _log_mass_between, truncnorm_sample
from .models import (
    extskew_component_logpdf,
    gaussian_component_logpdf,
    gumbel_eta_from_distance,
    rho_from_distance,
    skew_component_logpdf,
)
from .weights import cutoff_points, latent_bin, logit_cutoffs

_LOG_2PI = np.log(2.0 * np.pi)


# ---------------------------------------------------------------------------
# priors

@dataclass(frozen=True)
class NormalPrior:
    mean: float
    var: float

    def logpdf(self, x):
        return -0.5 * ((x - self.mean) ** 2 / self.var + np.log(self.var) + _LOG_2PI)

    @property
    def median(self):
        return self.mean


@dataclass(frozen=True)
class MVNormalPrior:
    mean: tuple
    var: tuple  # diagonal variances

    def as_arrays(self):
        m = np.asarray(self.mean, dtype=float)
        v = np.diag(np.asarray(self.var, dtype=float))
        return m, v


@dataclass(frozen=True)
class FlatPrior:
    """Improper flat prior (exposed for the least-squares limit in tests)."""

    def logpdf(self, x):
        return 0.0


@dataclass(frozen=True)
class InvGammaPrior:
    shape: float
    rate: float

    def logpdf(self, x):
        u, v = self.shape, self.rate
        return u * np.log(v) - special.gammaln(u) - (u + 1.0) * np.log(x) - v / x

    @property
    def median(self):
        return self.rate / special.gammaincinv(self.shape, 0.5)

    def sample(self, rng):
        return self.rate / rng.gamma(self.shape, 1.0)


@dataclass(frozen=True)
class GammaPrior:
    shape: float
    rate: float

    def logpdf(self, x):
        u, v = self.shape, self.rate
        return u * np.log(v) - special.gammaln(u) + (u - 1.0) * np.log(x) - v * x

    @property
    def median(self):
        return special.gammaincinv(self.shape, 0.5) / self.rate

    def sample(self, rng):
        return rng.gamma(self.shape, 1.0 / self.rate)


@dataclass
class PriorBlock:
    gamma: MVNormalPrior
    kappa2: InvGammaPrior
    zeta: InvGammaPrior
    theta: dict


def default_priors(kind, n_partitions=1, n_covariates=3):
    """Reference prior choices used across the experiments.

    gamma ~ N((-1.5, 0, 0), 2 I), kappa2 ~ IG(3, 1), zeta ~ IG(3, 0.2),
    range parameters IG(3, 1/3), variances IG(2, 1), marginal shapes
    Ga(1, 1), skewness N(0, 5), nugget IG(2, 0.1).
    """
    base = dict(
        gamma=MVNormalPrior((-1.5, 0.0, 0.0), (2.0, 2.0, 2.0)),
        kappa2=InvGammaPrior(3.0, 1.0),
        zeta=InvGammaPrior(3.0, 0.2),
    )
    if kind == "gaussian":
        theta = {
            "mu": NormalPrior(0.0, 100.0),
            "sigma2": InvGammaPrior(2.0, 1.0),
            "phi": InvGammaPrior(3.0, 1.0 / 3.0),
        }
    elif kind == "skew":
        theta = {
            "lam": NormalPrior(0.0, 5.0),
            "sigma2": InvGammaPrior(2.0, 1.0),
            "phi": InvGammaPrior(3.0, 1.0 / 3.0),
        }
    elif kind == "ext-skew":
        theta = {
            "beta": MVNormalPrior((0.0,) * 3, (100.0,) * 3),
            "lam": tuple(NormalPrior(0.0, 5.0) for _ in range(n_partitions)),
            "sigma2": InvGammaPrior(2.0, 1.0),
            "phi": InvGammaPrior(3.0, 1.0 / 3.0),
        }
    elif kind in ("copula-gaussian", "copula-gumbel"):
        theta = {
            "a": GammaPrior(1.0, 1.0),
            "b": GammaPrior(1.0, 1.0),
            "phi": InvGammaPrior(3.0, 1.0 / 3.0),
        }
    elif kind == "regression":
        theta = {
            "beta": MVNormalPrior((0.0,) * n_covariates, (100.0,) * n_covariates),
            "tau2": InvGammaPrior(2.0, 0.1),
            "sigma2": InvGammaPrior(2.0, 1.0),
            "phi": InvGammaPrior(3.0, 1.0 / 3.0),
        }
    else:
        raise ValueError(f"unknown family kind {kind!r}")
    return PriorBlock(theta=theta, **base)


@dataclass
class Schedule:
    iterations: int
    burnin: int
    thin: int = 1
    seed: int = 0
    steps: dict = dataclass_field(default_factory=dict)
    adapt: bool = True
    target_accept: float = 0.35

    def __post_init__(self):
        if self.burnin > self.iterations:
            raise ValueError("burn-in cannot exceed total iterations")
        if self.thin < 1:
            raise ValueError("thinning interval must be >= 1")

    @property
    def n_retained(self):
        return -(-(self.iterations - self.burnin) // self.thin)


@dataclass
class ChainDraws:
    """Thinned post-burn-in draws plus chain metadata."""

    family: str
    params: dict
    latent_t: np.ndarray
    loglik: np.ndarray
    accept_rates: dict
    schedule: Schedule
    L: int
    start: int

    @property
    def n_draws(self):
        return self.latent_t.shape[0]


# ---------------------------------------------------------------------------
# shared conjugate draws

def draw_mv_normal_posterior(rng, prior, design, resp, noise_var):
    """Conjugate normal draw for coefficients of resp = design @ beta + noise.

    ``prior=None`` (or FlatPrior) is the flat-prior limit whose posterior
    mean is the least-squares solution.
    """
    k = design.shape[1]
    if prior is None or isinstance(prior, FlatPrior):
        prec = design.T @ design / noise_var
        lin = design.T @ resp / noise_var
    else:
        pm, pv = prior.as_arrays()
        pv_inv = np.linalg.inv(pv)
        prec = pv_inv + design.T @ design / noise_var
        lin = pv_inv @ pm + design.T @ resp / noise_var
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ lin
    chol = np.linalg.cholesky(cov)
    return mean + chol @ rng.standard_normal(k), mean, cov


def draw_inv_gamma(rng, shape, rate):
    return rate / rng.gamma(shape, 1.0)


# ---------------------------------------------------------------------------
# samplers

class _AdaptiveStep:
    def __init__(self, step, target, enabled):
        self.step = step
        self.target = target
        self.enabled = enabled
        self.n_prop = 0
        self.n_acc = 0
        self._k = 0

    def adapt(self, accepted, in_burnin):
        self.n_prop += 1
        self.n_acc += int(accepted)
        if self.enabled and in_burnin:
            self._k += 1
            self.step *= np.exp((int(accepted) - self.target) / self._k**0.6)

    @property
    def rate(self):
        return self.n_acc / self.n_prop if self.n_prop else np.nan


class _ChainBase:
    kind = ""

    def __init__(self, ref: SiteSet, y, priors: PriorBlock, schedule: Schedule,
                 x=None, labels=None):
        y = np.asarray(y, dtype=float)
        if y.shape[0] != ref.n:
            raise ValueError("response length must match the reference set")
        self.ref = ref
        self.y = y
        self.L = ref.L
        self.priors = priors
        self.schedule = schedule
        self.rng = np.random.default_rng(schedule.seed)
        self.start = self._start_index()
        s, n = self.start, ref.n
        self.m = n - s
        if self.m < 1:
            raise ValueError("no modeled sites: reference set smaller than the conditioning block")
        self.rows = np.arange(self.m)
        self.nbr_idx = ref.nbr_idx[s:]
        self.nbr_dist = ref.nbr_dist[s:]
        self.counts = ref.nbr_count[s:]
        self.design = np.column_stack([np.ones(self.m), ref.coords[s:]])
        self.x = None if x is None else np.asarray(x, dtype=float)
        self.labels = None if labels is None else np.asarray(labels)
        # weight-model state
        self.gamma = np.asarray(priors.gamma.mean, dtype=float).copy()
        self.kappa2 = priors.kappa2.median
        self.zeta = priors.zeta.median
        self._edges_cache = (None, None)
        steps = dict(schedule.steps)
        self.steps = {
            name: _AdaptiveStep(steps.get(name, 0.1), schedule.target_accept, schedule.adapt)
            for name in ("zeta",) + self._mh_blocks()
        }
        mu = self.design @ self.gamma
        self.t = mu.copy()
        edges = self._edges()
        self.ell = latent_bin(self.t, edges)
        self.ell = np.minimum(self.ell, self.counts - 1)
        self._init_theta()
        self._in_burnin = True
        lp = self._log_posterior_probe()
        if not np.isfinite(lp):
            raise FloatingPointError(
                f"log posterior not finite at initialization (= {lp}); "
                f"state: gamma={self.gamma}, kappa2={self.kappa2}, zeta={self.zeta}, "
                f"theta={self._theta_dict()}"
            )

    # -- family hooks ------------------------------------------------------
    def _start_index(self):
        return self.L

    def _mh_blocks(self):
        raise NotImplementedError

    def _init_theta(self):
        raise NotImplementedError

    def _theta_dict(self):
        raise NotImplementedError

    def _logf_matrix(self):
        """(m, L) component log densities at the current parameters."""
        raise NotImplementedError

    def _logf_selected(self, **overrides):
        """(m,) selected-component log densities, with parameter overrides."""
        raise NotImplementedError

    def _update_theta(self):
        raise NotImplementedError

    # -- weight machinery ----------------------------------------------------
    def _edges(self, zeta=None):
        z = self.zeta if zeta is None else zeta
        key, val = self._edges_cache
        if key == z:
            return val
        r = cutoff_points(self.nbr_dist, z)
        edges = logit_cutoffs(r, counts=self.counts)
        self._edges_cache = (z, edges)
        return edges

    def _log_weights(self, edges):
        mu = self.design @ self.gamma
        kappa = np.sqrt(self.kappa2)
        zlo = (edges[:, :-1] - mu[:, None]) / kappa
        zhi = (edges[:, 1:] - mu[:, None]) / kappa
        with np.errstate(invalid="ignore", divide="ignore"):
            return _log_mass_between(zlo, zhi)

    def _log_weights_selected(self, edges, ell):
        mu = self.design @ self.gamma
        kappa = np.sqrt(self.kappa2)
        zlo = (edges[self.rows, ell] - mu) / kappa
        zhi = (edges[self.rows, ell + 1] - mu) / kappa
        with np.errstate(invalid="ignore", divide="ignore"):
            return _log_mass_between(zlo, zhi)

    # -- scan ---------------------------------------------------------------
    def _update_t(self):
        edges = self._edges()
        logq = self._log_weights(edges) + self._logf_matrix()
        mx = logq.max(axis=1, keepdims=True)
        p = np.exp(logq - mx)
        p /= p.sum(axis=1, keepdims=True)
        u = self.rng.random(self.m)
        ell = (np.cumsum(p, axis=1) < u[:, None]).sum(axis=1)
        self.ell = np.minimum(ell, self.counts - 1)
        mu = self.design @ self.gamma
        lo = edges[self.rows, self.ell]
        hi = edges[self.rows, self.ell + 1]
        t = truncnorm_sample(self.rng, mu, np.sqrt(self.kappa2), lo, hi)
        # keep t strictly inside its half-open bin so the label stays exact
        t = np.clip(t, np.nextafter(lo, np.inf), hi)
        self.t = t
        assert not __debug__ or np.array_equal(self.ell, latent_bin(t, edges))

    def _update_gamma(self):
        draw, _, _ = draw_mv_normal_posterior(
            self.rng, self.priors.gamma, self.design, self.t, self.kappa2
        )
        self.gamma = draw

    def _update_kappa2(self):
        resid = self.t - self.design @ self.gamma
        shape = self.priors.kappa2.shape + 0.5 * self.m
        rate = self.priors.kappa2.rate + 0.5 * np.dot(resid, resid)
        self.kappa2 = draw_inv_gamma(self.rng, shape, rate)

    def _update_zeta(self):
        """Collapsed log-scale Metropolis step for the cutoff range.

        The latent t are marginalized out of the target; on acceptance they
        are immediately redrawn from their full conditional (the truncated
        Gaussian of the retained label's bin under the new cutoffs), which
        keeps label and latent consistent at the end of every scan.
        """
        blk = self.steps["zeta"]
        prop = self.zeta * np.exp(blk.step * self.rng.standard_normal())
        cur_target = self.priors.zeta.logpdf(self.zeta) + np.sum(
            self._log_weights_selected(self._edges(), self.ell)
        )
        r_prop = cutoff_points(self.nbr_dist, prop)
        edges_prop = logit_cutoffs(r_prop, counts=self.counts)
        prop_target = self.priors.zeta.logpdf(prop) + np.sum(
            self._log_weights_selected(edges_prop, self.ell)
        )
        log_acc = prop_target - cur_target + np.log(prop) - np.log(self.zeta)
        accepted = np.log(self.rng.random()) < log_acc
        if accepted:
            self.zeta = prop
            self._edges_cache = (prop, edges_prop)
            mu = self.design @ self.gamma
            lo = edges_prop[self.rows, self.ell]
            hi = edges_prop[self.rows, self.ell + 1]
            t = truncnorm_sample(self.rng, mu, np.sqrt(self.kappa2), lo, hi)
            self.t = np.clip(t, np.nextafter(lo, np.inf), hi)
        blk.adapt(accepted, self._in_burnin)

    def _mh_log_scale(self, name, value, log_target):
        """Generic positive-parameter random-walk step on the log scale."""
        blk = self.steps[name]
        prop = value * np.exp(blk.step * self.rng.standard_normal())
        log_acc = log_target(prop) - log_target(value) + np.log(prop) - np.log(value)
        accepted = np.log(self.rng.random()) < log_acc
        blk.adapt(accepted, self._in_burnin)
        return prop if accepted else value

    def _mh_natural(self, name, value, log_target):
        blk = self.steps[name]
        prop = value + blk.step * self.rng.standard_normal(np.shape(value) or None)
        log_acc = log_target(prop) - log_target(value)
        accepted = np.log(self.rng.random()) < log_acc
        blk.adapt(accepted, self._in_burnin)
        return prop if accepted else value

    def scan(self):
        self._update_t()
        self._update_gamma()
        self._update_kappa2()
        self._update_zeta()
        self._update_theta()

    # -- likelihood ----------------------------------------------------------
    def mixture_loglik(self):
        edges = self._edges()
        logq = self._log_weights(edges) + self._logf_matrix()
        return float(np.sum(special.logsumexp(logq, axis=1)))

    def _log_posterior_probe(self):
        lp = self.mixture_loglik()
        lp += self.priors.kappa2.logpdf(self.kappa2) + self.priors.zeta.logpdf(self.zeta)
        return lp

    # -- driver ---------------------------------------------------------------
    def run(self):
        sched = self.schedule
        names = self._param_names()
        records = {name: [] for name in names}
        t_rec, ll_rec = [], []
        for it in range(sched.iterations):
            self._in_burnin = it < sched.burnin
            self.scan()
            if it >= sched.burnin and (it - sched.burnin) % sched.thin == 0:
                state = self._record_state()
                for name in names:
                    records[name].append(state[name])
                t_rec.append(self.t.copy())
                ll_rec.append(self.mixture_loglik())
        params = {name: np.asarray(vals) for name, vals in records.items()}
        return ChainDraws(
            family=self.kind,
            params=params,
            latent_t=np.asarray(t_rec).reshape(len(t_rec), self.m),
            loglik=np.asarray(ll_rec),
            accept_rates={name: blk.rate for name, blk in self.steps.items()},
            schedule=sched,
            L=self.L,
            start=self.start,
        )

    def _param_names(self):
        return ("gamma", "kappa2", "zeta") + tuple(self._theta_dict())

    def _record_state(self):
        state = {"gamma": self.gamma.copy(), "kappa2": self.kappa2, "zeta": self.zeta}
        state.update(self._theta_dict())
        return state


class GaussianChain(_ChainBase):
    """Stationary Gaussian mixture field: conjugate mu and sigma2, MH phi."""

    kind = "gaussian"

    def _mh_blocks(self):
        return ("phi",)

    def _init_theta(self):
        th = self.priors.theta
        self.mu = th["mu"].median
        self.sigma2 = th["sigma2"].median
        self.phi = th["phi"].median
        self._rho_cache = (None, None)
        self.ymod = self.y[self.start:]
        self.ynbr = np.where(self.nbr_idx >= 0, self.y[np.maximum(self.nbr_idx, 0)], 0.0)

    def _theta_dict(self):
        return {"mu": self.mu, "sigma2": self.sigma2, "phi": self.phi}

    def _rho(self, phi=None):
        p = self.phi if phi is None else phi
        key, val = self._rho_cache
        if key == p:
            return val
        rho = rho_from_distance(p, self.nbr_dist)
        self._rho_cache = (p, rho)
        return rho

    def _logf_matrix(self):
        return gaussian_component_logpdf(
            self.mu, self.sigma2, self._rho(), self.ymod[:, None], self.ynbr
        )

    def _sel(self):
        return (
            self._rho()[self.rows, self.ell],
            self.ynbr[self.rows, self.ell],
            self.nbr_dist[self.rows, self.ell],
        )

    def _update_theta(self):
        th = self.priors.theta
        rho_sel, ynbr_sel, d_sel = self._sel()
        # mu: the selected components are one linear-Gaussian regression
        resid = self.ymod - rho_sel * ynbr_sel
        coef = 1.0 - rho_sel
        var = self.sigma2 * (1.0 - rho_sel**2)
        prec = 1.0 / th["mu"].var + np.sum(coef**2 / var)
        lin = th["mu"].mean / th["mu"].var + np.sum(coef * resid / var)
        self.mu = lin / prec + self.rng.standard_normal() / np.sqrt(prec)
        # sigma2: conjugate inverse gamma given the selected components
        dev = self.ymod - (1.0 - rho_sel) * self.mu - rho_sel * ynbr_sel
        ss = np.sum(dev**2 / (1.0 - rho_sel**2))
        self.sigma2 = draw_inv_gamma(
            self.rng, th["sigma2"].shape + 0.5 * self.m, th["sigma2"].rate + 0.5 * ss
        )

        def phi_target(phi):
            rho = rho_from_distance(phi, d_sel)
            lf = gaussian_component_logpdf(self.mu, self.sigma2, rho, self.ymod, ynbr_sel)
            return th["phi"].logpdf(phi) + np.sum(lf)

        self.phi = self._mh_log_scale("phi", self.phi, phi_target)
        if self._rho_cache[0] != self.phi:
            self._rho_cache = (None, None)


class SkewGaussianChain(_ChainBase):
    """Stationary skew field: MH for skewness, variance, and range."""

    kind = "skew"

    def _mh_blocks(self):
        return ("lam", "sigma2", "phi")

    def _init_theta(self):
        th = self.priors.theta
        self.lam = th["lam"].median
        self.sigma2 = th["sigma2"].median
        self.phi = th["phi"].median
        self.ymod = self.y[self.start:]
        self.ynbr = np.where(self.nbr_idx >= 0, self.y[np.maximum(self.nbr_idx, 0)], 0.0)

    def _theta_dict(self):
        return {"lam": self.lam, "sigma2": self.sigma2, "phi": self.phi}

    def _logf_matrix(self):
        rho = rho_from_distance(self.phi, self.nbr_dist)
        return skew_component_logpdf(
            0.0, self.lam, self.sigma2, rho, self.ymod[:, None], self.ynbr
        )

    def _logf_sel(self, lam, sigma2, phi):
        d_sel = self.nbr_dist[self.rows, self.ell]
        ynbr_sel = self.ynbr[self.rows, self.ell]
        rho = rho_from_distance(phi, d_sel)
        return np.sum(skew_component_logpdf(0.0, lam, sigma2, rho, self.ymod, ynbr_sel))

    def _update_theta(self):
        th = self.priors.theta
        self.lam = self._mh_natural(
            "lam", self.lam,
            lambda v: th["lam"].logpdf(v) + self._logf_sel(v, self.sigma2, self.phi),
        )
        self.sigma2 = self._mh_log_scale(
            "sigma2", self.sigma2,
            lambda v: th["sigma2"].logpdf(v) + self._logf_sel(self.lam, v, self.phi),
        )
        self.phi = self._mh_log_scale(
            "phi", self.phi,
            lambda v: th["phi"].logpdf(v) + self._logf_sel(self.lam, self.sigma2, v),
        )


class ExtSkewGaussianChain(_ChainBase):
    """Skew field with regression location and partitioned skewness."""

    kind = "ext-skew"

    def __init__(self, ref, y, priors, schedule, labels=None, **kw):
        if labels is None:
            raise ValueError("extended skew fitting requires partition labels")
        super().__init__(ref, y, priors, schedule, labels=labels, **kw)

    def _mh_blocks(self):
        k = len(self.priors.theta["lam"])
        return ("beta", "sigma2", "phi") + tuple(f"lam{j}" for j in range(k))

    def _init_theta(self):
        th = self.priors.theta
        self.beta = np.asarray(th["beta"].mean, dtype=float).copy()
        self.lams = np.array([p.median for p in th["lam"]])
        self.sigma2 = th["sigma2"].median
        self.phi = th["phi"].median
        self.xmat = np.column_stack([np.ones(self.ref.n), self.ref.coords])
        self.ymod = self.y[self.start:]
        safe_idx = np.maximum(self.nbr_idx, 0)
        self.ynbr = np.where(self.nbr_idx >= 0, self.y[safe_idx], 0.0)
        self.lab_mod = self.labels[self.start:]
        self.lab_nbr = self.labels[safe_idx]

    def _theta_dict(self):
        return {
            "beta": self.beta.copy(),
            "lambdas": self.lams.copy(),
            "sigma2": self.sigma2,
            "phi": self.phi,
        }

    def _components(self, beta, lams, sigma2, phi, cols=None):
        xb = self.xmat @ beta
        xb_mod = xb[self.start:]
        if cols is None:
            rho = rho_from_distance(phi, self.nbr_dist)
            xb_nbr = np.where(self.nbr_idx >= 0, xb[np.maximum(self.nbr_idx, 0)], 0.0)
            lam_v = lams[self.lab_mod][:, None]
            lam_n = lams[self.lab_nbr]
            return extskew_component_logpdf(
                sigma2, rho, self.ymod[:, None], self.ynbr, xb_mod[:, None], xb_nbr, lam_v, lam_n
            )
        sel_idx = self.nbr_idx[self.rows, cols]
        rho = rho_from_distance(phi, self.nbr_dist[self.rows, cols])
        return extskew_component_logpdf(
            sigma2,
            rho,
            self.ymod,
            self.ynbr[self.rows, cols],
            xb_mod,
            xb[sel_idx],
            lams[self.lab_mod],
            lams[self.lab_nbr[self.rows, cols]],
        )

    def _logf_matrix(self):
        return self._components(self.beta, self.lams, self.sigma2, self.phi)

    def _update_theta(self):
        th = self.priors.theta

        def beta_target(beta):
            pm = np.asarray(th["beta"].mean)
            pv = np.asarray(th["beta"].var)
            lp = -0.5 * np.sum((beta - pm) ** 2 / pv)
            return lp + np.sum(self._components(beta, self.lams, self.sigma2, self.phi, self.ell))

        self.beta = self._mh_natural("beta", self.beta, beta_target)
        for j in range(self.lams.shape[0]):
            in_block = (self.lab_mod == j) | (self.lab_nbr[self.rows, self.ell] == j)

            def lam_target(v, j=j, in_block=in_block):
                lams = self.lams.copy()
                lams[j] = v
                terms = self._components(self.beta, lams, self.sigma2, self.phi, self.ell)
                return th["lam"][j].logpdf(v) + np.sum(terms[in_block])

            self.lams[j] = self._mh_natural(f"lam{j}", self.lams[j], lam_target)
        self.sigma2 = self._mh_log_scale(
            "sigma2", self.sigma2,
            lambda v: th["sigma2"].logpdf(v)
            + np.sum(self._components(self.beta, self.lams, v, self.phi, self.ell)),
        )
        self.phi = self._mh_log_scale(
            "phi", self.phi,
            lambda v: th["phi"].logpdf(v)
            + np.sum(self._components(self.beta, self.lams, self.sigma2, v, self.ell)),
        )


class CopulaChain(_ChainBase):
    """Copula mixture with gamma or beta stationary marginal."""

    kind = "copula"

    def __init__(self, ref, y, priors, schedule, copula="gaussian", marginal="gamma", **kw):
        self.copula_kind = copula
        self.marginal_kind = marginal
        super().__init__(ref, y, priors, schedule, **kw)
        self.kind = f"copula-{copula}-{marginal}"

    def _mh_blocks(self):
        return ("a", "b", "phi")

    def _marginal(self, a, b):
        return Gamma(a, b) if self.marginal_kind == "gamma" else Beta(a, b)

    def _init_theta(self):
        th = self.priors.theta
        self.a = th["a"].median
        self.b = th["b"].median
        self.phi = th["phi"].median
        self.ymod = self.y[self.start:]
        self.ynbr_idx = np.maximum(self.nbr_idx, 0)
        self._marg_cache = (None, None, None)
        self._dep_cache = (None, None)

    def _theta_dict(self):
        return {"a": self.a, "b": self.b, "phi": self.phi}

    def _uf(self, a=None, b=None):
        """(u over all sites, log f_Z over modeled sites) for marginal (a, b)."""
        a = self.a if a is None else a
        b = self.b if b is None else b
        key = (a, b)
        if self._marg_cache[0] == key:
            return self._marg_cache[1], self._marg_cache[2]
        fz = self._marginal(a, b)
        u = np.clip(fz.cdf(self.y), 1e-12, 1.0 - 1e-12)
        logfz = fz.logpdf(self.ymod)
        self._marg_cache = (key, u, logfz)
        return u, logfz

    def _dep(self, phi=None):
        p = self.phi if phi is None else phi
        key, val = self._dep_cache
        if key == p:
            return val
        if self.copula_kind == "gaussian":
            dep = rho_from_distance(p, self.nbr_dist)
        else:
            dep = gumbel_eta_from_distance(p, self.nbr_dist)
        self._dep_cache = (p, dep)
        return dep

    def _logc(self, dep, u1, u2):
        if self.copula_kind == "gaussian":
            return gaussian_logdensity(dep, u1, u2)
        return gumbel_logdensity(dep, u1, u2)

    def _logf_matrix(self):
        u, logfz = self._uf()
        return self._logc(self._dep(), u[self.start:, None], u[self.ynbr_idx]) + logfz[:, None]

    def _update_theta(self):
        th = self.priors.theta
        sel_idx = self.ynbr_idx[self.rows, self.ell]
        d_sel = self.nbr_dist[self.rows, self.ell]

        def marg_target(a, b):
            fz = self._marginal(a, b)
            u = np.clip(fz.cdf(self.y), 1e-12, 1.0 - 1e-12)
            dep = self._dep()[self.rows, self.ell]
            lf = self._logc(dep, u[self.start:], u[sel_idx]) + fz.logpdf(self.ymod)
            return np.sum(lf)

        self.a = self._mh_log_scale(
            "a", self.a, lambda v: th["a"].logpdf(v) + marg_target(v, self.b)
        )
        self.b = self._mh_log_scale(
            "b", self.b, lambda v: th["b"].logpdf(v) + marg_target(self.a, v)
        )
        self._marg_cache = (None, None, None)
        u, _ = self._uf()

        def phi_target(phi):
            if self.copula_kind == "gaussian":
                dep = rho_from_distance(phi, d_sel)
            else:
                dep = gumbel_eta_from_distance(phi, d_sel)
            return th["phi"].logpdf(phi) + np.sum(self._logc(dep, u[self.start:], u[sel_idx]))

        self.phi = self._mh_log_scale("phi", self.phi, phi_target)
        if self._dep_cache[0] != self.phi:
            self._dep_cache = (None, None)


class RegressionChain(_ChainBase):
    """Spatial regression with a latent stationary Gaussian mixture effect.

    y = x beta + z + eps; the selector variables cover sites from index 2 on
    (earlier sites have no choice of parent), and the latent effects are
    updated one at a time from their normal full conditionals, accumulating
    the contributions of every site whose selected parent they are.
    """

    kind = "regression"

    def __init__(self, ref, y, priors, schedule, x=None, **kw):
        if x is None:
            x = np.column_stack([np.ones(ref.n), ref.coords])
        super().__init__(ref, y, priors, schedule, x=x, **kw)

    def _start_index(self):
        return 2

    def _mh_blocks(self):
        return ("phi",)

    def _init_theta(self):
        th = self.priors.theta
        self.tau2 = th["tau2"].median
        self.sigma2 = th["sigma2"].median
        self.phi = th["phi"].median
        coef, *_ = np.linalg.lstsq(self.x, self.y, rcond=None)
        self.beta = coef
        self.z = self.y - self.x @ coef
        self._rho_cache = (None, None)
        # full-length parent bookkeeping; site 0 has no parent (rho = 0)
        self.par = np.zeros(self.ref.n, dtype=np.int64)
        self.par[0] = -1
        self.par[1] = 0
        self.rho_par = np.zeros(self.ref.n)
        self._refresh_parents()

    def _theta_dict(self):
        return {
            "beta": self.beta.copy(),
            "tau2": self.tau2,
            "sigma2": self.sigma2,
            "phi": self.phi,
        }

    def _record_state(self):
        state = super()._record_state()
        state["z"] = self.z.copy()
        return state

    def _param_names(self):
        return super()._param_names() + ("z",)

    def _rho(self, phi=None):
        p = self.phi if phi is None else phi
        key, val = self._rho_cache
        if key == p:
            return val
        rho = rho_from_distance(p, self.nbr_dist)
        self._rho_cache = (p, rho)
        return rho

    def _refresh_parents(self):
        self.par[self.start:] = self.nbr_idx[self.rows, self.ell]
        d1 = self.ref.nbr_dist[1, 0]
        self.rho_par[1] = rho_from_distance(self.phi, d1)
        self.rho_par[self.start:] = self._rho()[self.rows, self.ell]

    def _logf_matrix(self):
        znbr = np.where(self.nbr_idx >= 0, self.z[np.maximum(self.nbr_idx, 0)], 0.0)
        lf = gaussian_component_logpdf(
            0.0, self.sigma2, self._rho(), self.z[self.start:, None], znbr
        )
        return np.where(self.nbr_idx >= 0, lf, -np.inf)

    def _update_t(self):
        super()._update_t()
        self._refresh_parents()

    def mixture_loglik(self):
        """Conditional data deviance: Gaussian terms of y given the effects."""
        e = self.y - self.x @ self.beta - self.z
        return float(-0.5 * np.sum(e * e) / self.tau2 - 0.5 * self.ref.n * (np.log(self.tau2) + _LOG_2PI))

    def _update_theta(self):
        th = self.priors.theta
        n = self.ref.n
        # beta | z: conjugate (flat prior supported)
        draw, _, _ = draw_mv_normal_posterior(
            self.rng, th["beta"], self.x, self.y - self.z, self.tau2
        )
        self.beta = draw
        # tau2
        e = self.y - self.x @ self.beta - self.z
        self.tau2 = draw_inv_gamma(
            self.rng, th["tau2"].shape + 0.5 * n, th["tau2"].rate + 0.5 * np.dot(e, e)
        )
        # latent effects, sequential over the DAG
        self._update_z()
        # sigma2: every site contributes its selected component, site 0 its prior
        zpar_val = np.where(self.par >= 0, self.z[np.maximum(self.par, 0)], 0.0)
        dev = self.z - self.rho_par * zpar_val
        ss = np.sum(dev**2 / (1.0 - self.rho_par**2))
        self.sigma2 = draw_inv_gamma(
            self.rng, th["sigma2"].shape + 0.5 * n, th["sigma2"].rate + 0.5 * ss
        )

        def phi_target(phi):
            d1 = self.ref.nbr_dist[1, 0]
            rho1 = rho_from_distance(phi, d1)
            rho = rho_from_distance(phi, self.nbr_dist[self.rows, self.ell])
            rho_all = np.concatenate([[rho1], rho])
            zi = self.z[1:]
            zp = self.z[np.concatenate([[0], self.par[self.start:]])]
            lf = gaussian_component_logpdf(0.0, self.sigma2, rho_all, zi, zp)
            return th["phi"].logpdf(phi) + np.sum(lf)

        self.phi = self._mh_log_scale("phi", self.phi, phi_target)
        if self._rho_cache[0] != self.phi:
            self._rho_cache = (None, None)
        self._refresh_parents()

    def _update_z(self):
        n = self.ref.n
        dependents = [[] for _ in range(n)]
        for j in range(1, n):
            dependents[self.par[j]].append(j)
        resid = self.y - self.x @ self.beta
        tau2, sig2 = self.tau2, self.sigma2
        rho_par, z, par = self.rho_par, self.z, self.par
        eps = self.rng.standard_normal(n)
        for i in range(n):
            rho_i = rho_par[i]
            v_i = sig2 * (1.0 - rho_i**2)
            prec = 1.0 / tau2 + 1.0 / v_i
            lin = resid[i] / tau2
            if i > 0:
                lin += rho_i * z[par[i]] / v_i
            for j in dependents[i]:
                rho_j = rho_par[j]
                v_j = sig2 * (1.0 - rho_j**2)
                prec += rho_j**2 / v_j
                lin += rho_j * z[j] / v_j
            sd = 1.0 / np.sqrt(prec)
            z[i] = lin / prec + sd * eps[i]


_FAMILIES = {
    "gaussian": GaussianChain,
    "skew": SkewGaussianChain,
    "ext-skew": ExtSkewGaussianChain,
    "regression": RegressionChain,
}


def _build_chain(ref, y, kind, priors, schedule, **kwargs):
    if kind.startswith("copula-"):
        _, cop, marg = kind.split("-")
        if priors is None:
            priors = default_priors(f"copula-{cop}")
        return CopulaChain(ref, y, priors, schedule, copula=cop, marginal=marg, **kwargs)
    if priors is None:
        n_part = len(np.unique(kwargs["labels"])) if kind == "ext-skew" else 1
        n_cov = 3
        if kind == "regression" and kwargs.get("x") is not None:
            n_cov = np.asarray(kwargs["x"]).shape[1]
        priors = default_priors(kind, n_partitions=n_part, n_covariates=n_cov)
    return _FAMILIES[kind](ref, y, priors, schedule, **kwargs)


def loglik_at_posterior_mean(ref: SiteSet, y, draws: ChainDraws, labels=None, x=None):
    """Conditional log likelihood evaluated at the posterior-mean parameters."""
    kwargs = {}
    if draws.family == "ext-skew":
        kwargs["labels"] = labels
    if draws.family == "regression" and x is not None:
        kwargs["x"] = x
    chain = _build_chain(
        ref, y, draws.family, None, Schedule(iterations=1, burnin=1, seed=0), **kwargs
    )
    p = draws.params
    chain.gamma = np.mean(p["gamma"], axis=0)
    chain.kappa2 = float(np.mean(p["kappa2"]))
    chain.zeta = float(np.mean(p["zeta"]))
    chain._edges_cache = (None, None)
    if draws.family == "gaussian":
        chain.mu = float(np.mean(p["mu"]))
        chain.sigma2 = float(np.mean(p["sigma2"]))
        chain.phi = float(np.mean(p["phi"]))
    elif draws.family == "skew":
        chain.lam = float(np.mean(p["lam"]))
        chain.sigma2 = float(np.mean(p["sigma2"]))
        chain.phi = float(np.mean(p["phi"]))
    elif draws.family == "ext-skew":
        chain.beta = np.mean(p["beta"], axis=0)
        chain.lams = np.mean(p["lambdas"], axis=0)
        chain.sigma2 = float(np.mean(p["sigma2"]))
        chain.phi = float(np.mean(p["phi"]))
    elif draws.family.startswith("copula-"):
        chain.a = float(np.mean(p["a"]))
        chain.b = float(np.mean(p["b"]))
        chain.phi = float(np.mean(p["phi"]))
        chain._marg_cache = (None, None, None)
        chain._dep_cache = (None, None)
    elif draws.family == "regression":
        chain.beta = np.mean(p["beta"], axis=0)
        chain.tau2 = float(np.mean(p["tau2"]))
        chain.sigma2 = float(np.mean(p["sigma2"]))
        chain.phi = float(np.mean(p["phi"]))
        chain.z = np.mean(p["z"], axis=0)
        chain._rho_cache = (None, None)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return chain.mixture_loglik()


def run_chain(ref: SiteSet, y, kind, priors=None, schedule=None, **kwargs) -> ChainDraws:
    """Fit one family to data on a reference set and return thinned draws.

    ``kind`` is one of 'gaussian', 'skew', 'ext-skew', 'regression',
    'copula-gaussian-gamma', 'copula-gaussian-beta', 'copula-gumbel-gamma',
    'copula-gumbel-beta'. Identical seeds give bit-identical draws.
    """
    if schedule is None:
        raise ValueError("a Schedule is required")
    chain = _build_chain(ref, y, kind, priors, schedule, **kwargs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return chain.run()
