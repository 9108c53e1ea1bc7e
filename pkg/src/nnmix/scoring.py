"""Prediction and model-comparison metrics.

RMSPE, CRPS, interval coverage/width, the posterior predictive loss
criterion, DIC, empirical tail-dependence estimates, and effective sample
size. Formulas for the named criteria are spelled out in the report header
each score emits, so the numbers are auditable:

    CRPS  = mean|X - y| - 0.5 mean|X - X'|   (sample form, O(m log m))
    PPLC  = G + P,  G = sum (mean rep - obs)^2,  P = sum Var(rep)
    DIC   = Dbar + pD,  D = -2 log L,  pD = Dbar - D(at posterior mean)

Coverage counts closed intervals: an observation on an interval boundary
counts as covered.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def crps_empirical(draws, observed):
    """CRPS of an ensemble forecast against a scalar observation.

    Uses the sorted O(m log m) identity for the mean absolute pairwise
    difference; equals the brute-force double sum.
    """
    x = np.sort(np.asarray(draws, dtype=float))
    m = x.shape[0]
    if m < 2:
        raise ValueError("need at least 2 draws for CRPS")
    term1 = np.mean(np.abs(x - observed))
    # mean pairwise gap: sum_{i,j} |x_i - x_j| = 2 sum_i (2i - m + 1) x_(i)
    coeff = 2.0 * np.arange(m) - m + 1.0
    mean_gap = 2.0 * np.dot(coeff, x) / (m * m)
    return float(term1 - 0.5 * mean_gap)


def crps_mean(draw_matrix, observed):
    """Mean CRPS across sites; draw_matrix is (ndraws, nsites)."""
    draw_matrix = np.asarray(draw_matrix, dtype=float)
    observed = np.asarray(observed, dtype=float)
    return float(
        np.mean([crps_empirical(draw_matrix[:, j], observed[j]) for j in range(observed.shape[0])])
    )


def rmspe(predicted, observed):
    predicted = np.asarray(predicted, dtype=float)
    observed = np.asarray(observed, dtype=float)
    return float(np.sqrt(np.mean((predicted - observed) ** 2)))


def interval_bounds(draw_matrix, level=0.95):
    lo = 0.5 * (1.0 - level)
    q = np.quantile(np.asarray(draw_matrix, dtype=float), [lo, 1.0 - lo], axis=0)
    return q[0], q[1]


def coverage_and_width(draw_matrix, observed, level=0.95):
    """Closed-interval empirical coverage and mean width of central intervals."""
    lo, hi = interval_bounds(draw_matrix, level)
    observed = np.asarray(observed, dtype=float)
    covered = (observed >= lo) & (observed <= hi)
    return float(np.mean(covered)), float(np.mean(hi - lo))


def pplc(draw_matrix, observed):
    """Posterior predictive loss: goodness-of-fit G plus penalty P."""
    draw_matrix = np.asarray(draw_matrix, dtype=float)
    observed = np.asarray(observed, dtype=float)
    g = float(np.sum((draw_matrix.mean(axis=0) - observed) ** 2))
    p = float(np.sum(draw_matrix.var(axis=0)))
    return g, p, g + p


def dic(loglik_draws, loglik_at_mean):
    """Deviance information criterion from per-draw log likelihoods."""
    loglik_draws = np.asarray(loglik_draws, dtype=float)
    if not np.all(np.isfinite(loglik_draws)) or not np.isfinite(loglik_at_mean):
        raise ValueError("log likelihoods must be finite")
    dbar = float(np.mean(-2.0 * loglik_draws))
    d_hat = float(-2.0 * loglik_at_mean)
    p_d = dbar - d_hat
    return dbar, p_d, dbar + p_d


@dataclass(frozen=True)
class TailEstimate:
    q: float
    estimate: float
    se: float
    n_joint: int
    n_conditioning: int
    defined: bool = True


def empirical_tail(u, v, q, tail="upper"):
    """Conditional exceedance estimate with a binomial standard error.

    Upper tail: P(U > q | V > q); lower tail uses <=. Both margins are
    assumed uniform (probability-transform the data first otherwise). When
    nothing exceeds the threshold the estimate is flagged undefined.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if not 0.0 < q < 1.0:
        raise ValueError("q must be inside (0, 1)")
    if tail == "upper":
        cond = v > q
        joint = cond & (u > q)
    elif tail == "lower":
        cond = v <= q
        joint = cond & (u <= q)
    else:
        raise ValueError("tail must be 'upper' or 'lower'")
    n_cond = int(np.count_nonzero(cond))
    n_joint = int(np.count_nonzero(joint))
    if n_cond == 0:
        return TailEstimate(q, np.nan, np.nan, 0, 0, defined=False)
    est = n_joint / n_cond
    se = np.sqrt(max(est * (1.0 - est), 1e-300) / n_cond)
    return TailEstimate(q, est, se, n_joint, n_cond)


def effective_sample_size(x):
    """ESS via the initial positive sequence of autocorrelations."""
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 4:
        return float(n)
    xc = x - x.mean()
    var = np.dot(xc, xc) / n
    if var == 0:
        return float(n)
    acf = np.array([np.dot(xc[: n - k], xc[k:]) / (n * var) for k in range(1, n // 2)])
    s = 0.0
    for k in range(0, acf.shape[0] - 1, 2):
        pair = acf[k] + acf[k + 1]
        if pair < 0:
            break
        s += pair
    return float(n / (1.0 + 2.0 * s))


@dataclass
class ScoreReport:
    """Flat score table for one model on one held-out set."""

    rmspe: float
    crps: float
    coverage: float
    width: float
    level: float
    pplc_g: float | None = None
    pplc_p: float | None = None
    pplc: float | None = None
    dic_dbar: float | None = None
    dic_pd: float | None = None
    dic: float | None = None
    n_sites: int = 0
    per_site: dict = field(default_factory=dict)

    HEADER = (
        "# CRPS = mean|X-y| - 0.5 mean|X-X'| (sample form); "
        "PPLC = G + P with G = sum (mean rep - obs)^2, P = sum Var(rep); "
        "DIC = Dbar + pD with D = -2 logL, pD = Dbar - D(posterior mean); "
        "coverage counts closed intervals"
    )

    def as_text(self):
        lines = [self.HEADER]
        for key in (
            "n_sites", "level", "rmspe", "crps", "coverage", "width",
            "pplc_g", "pplc_p", "pplc", "dic_dbar", "dic_pd", "dic",
        ):
            val = getattr(self, key)
            if val is not None:
                lines.append(f"{key} = {val!r}")
        return "\n".join(lines) + "\n"

    def as_rows(self):
        """Per-site detail rows (site index, observed, median, lo, hi, crps)."""
        keys = sorted(self.per_site)
        return [
            (k, *self.per_site[k]) for k in keys
        ]


def score_predictions(draw_matrix, observed, level=0.95, loglik_draws=None,
                      loglik_at_mean=None):
    """Assemble a ScoreReport from predictive draws at held-out sites."""
    draw_matrix = np.asarray(draw_matrix, dtype=float)
    observed = np.asarray(observed, dtype=float)
    med = np.median(draw_matrix, axis=0)
    cov, width = coverage_and_width(draw_matrix, observed, level)
    g, p, tot = pplc(draw_matrix, observed)
    rep = ScoreReport(
        rmspe=rmspe(med, observed),
        crps=crps_mean(draw_matrix, observed),
        coverage=cov,
        width=width,
        level=level,
        pplc_g=g,
        pplc_p=p,
        pplc=tot,
        n_sites=observed.shape[0],
    )
    lo, hi = interval_bounds(draw_matrix, level)
    for j in range(observed.shape[0]):
        rep.per_site[j] = (
            float(observed[j]), float(med[j]), float(lo[j]), float(hi[j]),
            float(crps_empirical(draw_matrix[:, j], observed[j])),
        )
    if loglik_draws is not None and loglik_at_mean is not None:
        rep.dic_dbar, rep.dic_pd, rep.dic = dic(loglik_draws, loglik_at_mean)
    return rep
