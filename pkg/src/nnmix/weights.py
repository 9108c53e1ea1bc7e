"""Spatially varying mixture weights.

Weights at a site are increments of a logit-Gaussian distribution between
cutoff points on (0, 1). Cutoff increments are proportional to a bounded
kernel of the site-to-neighbor distances (exponential kernel with range
``zeta``), so near neighbors own wider bins; the logit-Gaussian then tilts
mass across bins through its mean ``mu(site) = gamma0 + gamma1 x + gamma2 y``
and variance ``kappa2``. A small mean favors the near-neighbor bins.

The latent-variable bridge used by the sampler lives here too: a Gaussian
draw ``t`` with mean ``mu(site)`` and variance ``kappa2`` selects the mixture
component through the logit-scale bins.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

# interior cutoffs are clamped before the logit so bin edges stay finite
CUTOFF_EPS = 1e-10


@dataclass(frozen=True)
class WeightParams:
    """Weight-model parameters: logit-Gaussian mean coefficients and spread."""

    gamma: tuple[float, float, float]
    kappa2: float
    zeta: float

    def __post_init__(self):
        if not self.kappa2 > 0:
            raise ValueError("kappa2 must be positive")
        if not self.zeta > 0:
            raise ValueError("zeta must be positive")

    def mu(self, coords):
        coords = np.asarray(coords, dtype=float)
        g0, g1, g2 = self.gamma
        return g0 + g1 * coords[..., 0] + g2 * coords[..., 1]


def cutoff_points(dists, zeta):
    """Cutoffs 0 = r_0 < ... < r_m = 1 with increments prop. to exp(-d/zeta).

    ``dists`` is (m,) or (n, m); rows with padded ``inf`` distances get
    zero-width trailing bins. If every kernel value underflows the increments
    fall back to equal widths (with a warning).
    """
    d = np.atleast_2d(np.asarray(dists, dtype=float))
    k = np.where(np.isfinite(d), np.exp(-d / zeta), 0.0)
    tot = k.sum(axis=1, keepdims=True)
    dead = tot[:, 0] == 0.0
    if np.any(dead):
        warnings.warn(
            "cutoff kernel underflowed to zero for some sites; "
            "falling back to equal increments",
            stacklevel=2,
        )
        nvalid = np.isfinite(d).sum(axis=1, keepdims=True)
        k = np.where(dead[:, None], np.where(np.isfinite(d), 1.0 / np.maximum(nvalid, 1), 0.0), k)
        tot = k.sum(axis=1, keepdims=True)
    inc = k / tot
    r = np.concatenate([np.zeros((d.shape[0], 1)), np.cumsum(inc, axis=1)], axis=1)
    r[:, -1] = 1.0  # normalize the last bin exactly
    if np.asarray(dists).ndim == 1:
        return r[0]
    return r


def logit_cutoffs(r, counts=None):
    """Bin edges on the latent-Gaussian scale: logit of interior cutoffs.

    Returns edges with -inf / +inf in the outer slots; interior cutoffs are
    clamped to [CUTOFF_EPS, 1 - CUTOFF_EPS] first. When ``counts`` gives the
    true neighbor count of padded rows, edges past the last real cutoff are
    +inf so the final real bin extends to infinity and padded bins carry
    exactly zero mass.
    """
    r = np.asarray(r, dtype=float)
    interior = np.clip(r[..., 1:-1], CUTOFF_EPS, 1.0 - CUTOFF_EPS)
    rstar = np.log(interior) - np.log1p(-interior)
    if counts is not None:
        slot = np.arange(1, r.shape[-1] - 1)
        pad = slot >= np.asarray(counts)[..., None]
        rstar = np.where(pad, np.inf, rstar)
    shape = rstar.shape[:-1]
    neg = np.full(shape + (1,), -np.inf)
    pos = np.full(shape + (1,), np.inf)
    return np.concatenate([neg, rstar, pos], axis=-1)


def logit_gaussian_weights(rstar, mu, kappa2):
    """Bin masses of a logit-Gaussian: Phi increments between logit cutoffs."""
    rstar = np.asarray(rstar, dtype=float)
    mu = np.asarray(mu, dtype=float)
    kappa = np.sqrt(kappa2)
    z = (rstar - mu[..., None]) / kappa
    cdf = special.ndtr(z)
    w = np.diff(cdf, axis=-1)
    w = np.maximum(w, 0.0)
    tot = w.sum(axis=-1, keepdims=True)
    return w / np.where(tot > 0, tot, 1.0)


def kernel_weights(dists, zeta):
    """Uniform-G limit of the weight model: weights are the increments."""
    r = cutoff_points(dists, zeta)
    return np.diff(r, axis=-1)


def site_weights(params: WeightParams, coords, dists, uniform=False, counts=None):
    """Weights for one or many sites from distances to their neighbors."""
    if uniform:
        return kernel_weights(dists, params.zeta)
    r = cutoff_points(dists, params.zeta)
    rstar = logit_cutoffs(r, counts=counts)
    return logit_gaussian_weights(rstar, params.mu(coords), params.kappa2)


def latent_bin(t, rstar):
    """Component index of a latent value among logit-scale bin edges.

    Bins are half-open on the right: ``t`` exactly at an interior edge maps
    to the lower bin. Values beyond the outer edges map to the first / last
    bin, so the index is always valid.
    """
    rstar = np.asarray(rstar, dtype=float)
    interior = rstar[..., 1:-1]
    t = np.asarray(t, dtype=float)
    if rstar.ndim == 1:
        return np.searchsorted(interior, t, side="left")
    # row-wise: counting edges strictly below t matches side="left"
    return np.sum(interior < t[..., None], axis=-1)
