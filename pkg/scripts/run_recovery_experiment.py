#!/usr/bin/env python3
"""Self-recovery study for the stationary Gaussian mixture field.

Simulates fields from known parameters, refits the same family, and reports
how often the 95% credible intervals cover the generating variance and range.

Usage:
    python scripts/run_recovery_experiment.py [--replicates 10] [--n 800]
"""

import argparse

import numpy as np

from nnmix.geo import build_reference
from nnmix.mcmc import Schedule, run_chain
from nnmix.models import GaussianNNMP
from nnmix.simulate import simulate_nnmp
from nnmix.weights import WeightParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replicates", type=int, default=10)
    ap.add_argument("--n", type=int, default=800)
    ap.add_argument("--neighbors", type=int, default=10)
    ap.add_argument("--iterations", type=int, default=20000)
    ap.add_argument("--burnin", type=int, default=8000)
    ap.add_argument("--thin", type=int, default=10)
    ap.add_argument("--sigma2", type=float, default=1.0)
    ap.add_argument("--phi", type=float, default=0.15)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = GaussianNNMP(mu=0.0, sigma2=args.sigma2, phi=args.phi)
    wp = WeightParams(gamma=(-1.5, 0.0, 0.0), kappa2=1.0, zeta=0.1)
    cover_s, cover_p = 0, 0
    for rep in range(args.replicates):
        seed = args.seed + 17 * rep
        rng = np.random.default_rng(seed)
        coords = rng.random((args.n, 2))
        ref = build_reference(coords, L=args.neighbors, ordering="random", seed=seed + 1)
        y = simulate_nnmp(spec, ref, wp, seed=seed + 2).values
        draws = run_chain(
            ref, y, "gaussian",
            schedule=Schedule(args.iterations, args.burnin, args.thin, seed=seed + 3),
        )
        s_lo, s_hi = np.quantile(draws.params["sigma2"], [0.025, 0.975])
        p_lo, p_hi = np.quantile(draws.params["phi"], [0.025, 0.975])
        got_s = s_lo <= args.sigma2 <= s_hi
        got_p = p_lo <= args.phi <= p_hi
        cover_s += got_s
        cover_p += got_p
        print(
            f"replicate {rep}: sigma2 CI [{s_lo:.3f}, {s_hi:.3f}] {'ok' if got_s else 'MISS'}; "
            f"phi CI [{p_lo:.3f}, {p_hi:.3f}] {'ok' if got_p else 'MISS'}"
        )
    print(f"coverage: sigma2 {cover_s}/{args.replicates}, phi {cover_p}/{args.replicates}")


if __name__ == "__main__":
    main()
