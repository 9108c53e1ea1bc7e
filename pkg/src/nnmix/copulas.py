"""Bivariate Gaussian and Gumbel copulas.

Density, conditional cdf, inverse-conditional sampling, Kendall-tau links,
and tail-dependence coefficients. All heavy expressions are evaluated in log
space: copula densities span hundreds of orders of magnitude near the corners
of the unit square, and the samplers hit those corners routinely.

The module-level functions accept array-valued copula parameters (the spatial
models index the parameter by location); the frozen dataclasses wrap them for
the scalar-parameter case and carry the parameter-range invariants.

Arguments on the unit square are clamped to ``[CLAMP_EPS, 1 - CLAMP_EPS]``
before log / inverse-normal transforms; quantile-of-cdf compositions land
exactly on 0 or 1 often enough that this is a correctness fix, not a
cosmetic one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

CLAMP_EPS = 1e-12
GUMBEL_ETA_CAP = 50.0


def _clamp(t):
    return np.clip(np.asarray(t, dtype=float), CLAMP_EPS, 1.0 - CLAMP_EPS)


@dataclass(frozen=True)
class TailCoefficients:
    lower: float
    upper: float


# ---------------------------------------------------------------------------
# Gaussian copula primitives (array-valued rho)

def gaussian_logdensity(rho, t1, t2):
    q1 = special.ndtri(_clamp(t1))
    q2 = special.ndtri(_clamp(t2))
    s = 1.0 - rho * rho
    return -0.5 * np.log(s) + (2.0 * rho * q1 * q2 - rho * rho * (q1 * q1 + q2 * q2)) / (2.0 * s)


def gaussian_conditional_cdf(rho, t1, t2):
    q1 = special.ndtri(_clamp(t1))
    q2 = special.ndtri(_clamp(t2))
    return special.ndtr((q1 - rho * q2) / np.sqrt(1.0 - rho * rho))


def gaussian_inverse_conditional(rho, z, t2):
    qz = special.ndtri(_clamp(z))
    q2 = special.ndtri(_clamp(t2))
    return special.ndtr(np.sqrt(1.0 - rho * rho) * qz + rho * q2)


# ---------------------------------------------------------------------------
# Gumbel copula primitives (array-valued eta)

def _log_u(t):
    u = -np.log(_clamp(t))
    return u, np.log(u)


def gumbel_logdensity(eta, t1, t2):
    u1, lu1 = _log_u(t1)
    u2, lu2 = _log_u(t2)
    log_s = np.logaddexp(eta * lu1, eta * lu2)
    y = np.exp(log_s / eta)
    return (
        -y
        + np.log(y + eta - 1.0)
        + (1.0 / eta - 2.0) * log_s
        + (eta - 1.0) * (lu1 + lu2)
        + (u1 + u2)
    )


def gumbel_cdf(eta, t1, t2):
    _, lu1 = _log_u(t1)
    _, lu2 = _log_u(t2)
    log_s = np.logaddexp(eta * lu1, eta * lu2)
    return np.exp(-np.exp(log_s / eta))


def gumbel_conditional_cdf(eta, t1, t2):
    """P(T1 <= t1 | T2 = t2) = dC/dt2, evaluated stably in logs."""
    _, lu1 = _log_u(t1)
    u2, lu2 = _log_u(t2)
    log_s = np.logaddexp(eta * lu1, eta * lu2)
    y = np.exp(log_s / eta)
    return np.exp(u2 - y + (1.0 / eta - 1.0) * (log_s - eta * lu2))


def gumbel_inverse_conditional(eta, z, t2):
    u2, lu2 = _log_u(t2)
    logz = np.log(_clamp(z))
    y = _gumbel_conditional_root(eta, u2, lu2, logz)
    # u1 = (y^eta - u2^eta)^(1/eta), in logs to survive eta near the cap
    d = eta * (np.log(y) - lu2)
    with np.errstate(over="ignore"):
        log_em1 = np.where(
            d > 30.0, d + np.log1p(-np.exp(-d)), np.log(np.expm1(np.maximum(d, 1e-300)))
        )
    lu1 = lu2 + log_em1 / eta
    return np.exp(-np.exp(lu1))


def _gumbel_conditional_root(eta, u2, lu2, logz):
    """Root of h(y) = y + (eta-1) log y - (u2 + (eta-1) log u2 - log z), y >= u2.

    h is strictly increasing on (0, inf) with h(u2) = log z <= 0, so the root
    is bracketed by [u2, u2 - log z + (eta-1)*40]; safeguarded Newton refines
    to |h| <= 1e-12.
    """
    eta, u2, lu2, logz = np.broadcast_arrays(
        np.asarray(eta, dtype=float),
        np.asarray(u2, dtype=float),
        np.asarray(lu2, dtype=float),
        np.asarray(logz, dtype=float),
    )
    em1 = eta - 1.0
    c = u2 + em1 * lu2 - logz
    lo = u2.copy()
    hi = u2 - logz + em1 * 40.0 + 1e-12
    y = np.maximum(np.minimum(c, hi), lo)  # Newton start: drop the log term
    y = np.maximum(y, 1e-300)
    for _ in range(200):
        h = y + em1 * np.log(y) - c
        done = np.abs(h) <= 1e-12
        if np.all(done):
            return y
        lo = np.where(h < 0, y, lo)
        hi = np.where(h > 0, y, hi)
        ynew = y - h / (1.0 + em1 / y)
        inside = (ynew > lo) & (ynew < hi)
        y = np.where(done, y, np.where(inside, ynew, 0.5 * (lo + hi)))
    worst = int(np.argmax(np.abs(h)))
    raise RuntimeError(
        "Gumbel conditional root search failed to converge: "
        f"eta={eta.flat[worst]}, u2={u2.flat[worst]}, "
        f"logz={logz.flat[worst]}, residual={h.flat[worst]}"
    )


# ---------------------------------------------------------------------------
# scalar-parameter wrappers

@dataclass(frozen=True)
class GaussianCopula:
    """Gaussian copula with correlation ``rho`` in (-1, 1)."""

    rho: float

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError("Gaussian copula needs rho strictly inside (-1, 1)")

    def logdensity(self, t1, t2):
        return gaussian_logdensity(self.rho, t1, t2)

    def density(self, t1, t2):
        return np.exp(self.logdensity(t1, t2))

    def cdf(self, t1, t2):
        """Joint cdf C(t1, t2) via Owen's T (independent of conditional_cdf)."""
        h = special.ndtri(_clamp(t1))
        k = special.ndtri(_clamp(t2))
        return bvn_cdf(h, k, self.rho)

    def conditional_cdf(self, t1, t2):
        return gaussian_conditional_cdf(self.rho, t1, t2)

    def inverse_conditional(self, z, t2):
        return gaussian_inverse_conditional(self.rho, z, t2)

    def tail_coefficients(self) -> TailCoefficients:
        return TailCoefficients(lower=0.0, upper=0.0)

    def kendall_tau(self) -> float:
        return 2.0 * np.arcsin(self.rho) / np.pi

    def sample_pair(self, rng, size):
        """Draws (t1, t2) via the conditional route: t2 uniform, t1 inverse."""
        t2 = rng.random(size)
        z = rng.random(size)
        return self.inverse_conditional(z, t2), t2


@dataclass(frozen=True)
class GumbelCopula:
    """Gumbel copula with parameter ``eta`` in [1, GUMBEL_ETA_CAP].

    The cap is part of the parameter type, not just of the distance link, so
    no code path can construct a numerically unstable copula.
    """

    eta: float

    def __post_init__(self):
        if not 1.0 <= self.eta <= GUMBEL_ETA_CAP:
            raise ValueError(f"Gumbel eta must lie in [1, {GUMBEL_ETA_CAP:g}]")

    def logdensity(self, t1, t2):
        return gumbel_logdensity(self.eta, t1, t2)

    def density(self, t1, t2):
        return np.exp(self.logdensity(t1, t2))

    def cdf(self, t1, t2):
        return gumbel_cdf(self.eta, t1, t2)

    def conditional_cdf(self, t1, t2):
        return gumbel_conditional_cdf(self.eta, t1, t2)

    def inverse_conditional(self, z, t2):
        return gumbel_inverse_conditional(self.eta, z, t2)

    def tail_coefficients(self) -> TailCoefficients:
        return TailCoefficients(lower=0.0, upper=2.0 - 2.0 ** (1.0 / self.eta))

    def kendall_tau(self) -> float:
        return 1.0 - 1.0 / self.eta

    def sample_pair(self, rng, size):
        t2 = rng.random(size)
        z = rng.random(size)
        return self.inverse_conditional(z, t2), t2


def gumbel_from_kendall_tau(tau):
    """Gumbel parameter for concordance tau in [0, 1), capped for stability."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("Gumbel copula cannot represent negative concordance")
    if np.any(tau >= 1):
        raise ValueError("tau must be < 1")
    with np.errstate(divide="ignore"):
        eta = np.minimum(1.0 / (1.0 - tau), GUMBEL_ETA_CAP)
    if eta.ndim == 0:
        return GumbelCopula(float(eta))
    return eta


def gaussian_from_kendall_tau(tau):
    """Gaussian correlation for concordance tau in (-1, 1)."""
    tau = np.asarray(tau, dtype=float)
    if np.any(np.abs(tau) >= 1):
        raise ValueError("tau must lie strictly inside (-1, 1)")
    rho = np.sin(0.5 * np.pi * tau)
    if rho.ndim == 0:
        return GaussianCopula(float(rho))
    return rho


def bvn_cdf(h, k, rho):
    """Standard bivariate normal cdf P(X <= h, Y <= k) with correlation rho."""
    h = np.asarray(h, dtype=float)
    k = np.asarray(k, dtype=float)
    if abs(rho) < 1e-15:
        return special.ndtr(h) * special.ndtr(k)
    # Owen (1956); nudge exact zeros off the singular axis of the identity
    tiny = 1e-13
    h = np.where(np.abs(h) < tiny, tiny, h)
    k = np.where(np.abs(k) < tiny, tiny, k)
    s = np.sqrt(1.0 - rho * rho)
    ah = (k / h - rho) / s
    ak = (h / k - rho) / s
    beta = np.where(h * k > 0, 0.0, 0.5)
    return (
        0.5 * (special.ndtr(h) + special.ndtr(k))
        - special.owens_t(h, ah)
        - special.owens_t(k, ak)
        - beta
    )


Copula = GaussianCopula | GumbelCopula
