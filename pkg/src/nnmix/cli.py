"""Batch command-line interface.

Subcommands: ``simulate`` (benchmark fields to a dataset file), ``fit``
(posterior sampling to a draws directory), ``predict`` (gridded predictive
summaries), ``score`` (held-out metrics), and ``tail-bounds`` (per-site
tail-dependence lower bounds). Nonzero exits carry a category: 2 config,
3 data, 4 numeric. All randomness flows from seeds in the config (flags
override), so reruns are bit-reproducible; artifacts are written atomically
and stamped with the config hash.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io as nio
from . import models, predict as npredict, scoring, simulate as nsim
from .geo import build_reference, neighbors_of_query
from .io import ConfigError, DataError, NumericError, RunConfig
from .mcmc import Schedule, default_priors, loglik_at_posterior_mean, run_chain
from .weights import WeightParams, site_weights


def _config_from_args(args):
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig.from_entries({})
    if getattr(args, "data", None):
        cfg.override("data.path", args.data)
    if getattr(args, "out", None):
        cfg.override("out.dir", args.out)
    if getattr(args, "seed", None) is not None:
        for key in ("mcmc.seed", "sim.seed", "predict.seed"):
            cfg.override(key, args.seed)
    for flag, key in (
        ("iterations", "mcmc.iterations"),
        ("burnin", "mcmc.burnin"),
        ("thin", "mcmc.thin"),
        ("neighbors", "model.L"),
    ):
        val = getattr(args, flag, None)
        if val is not None:
            cfg.override(key, val)
    return cfg


def _load_dataset(cfg):
    path = cfg.get("data.path")
    if not os.path.exists(path):
        raise DataError(f"dataset file not found: {path}")
    return nio.load_dataset(path), path


def _build_reference(cfg, ds):
    mask = ds.reference_mask()
    if mask.sum() < 2:
        raise DataError("fewer than 2 usable reference rows in the dataset")
    ref = build_reference(
        ds.coords[mask],
        cfg.get_int("model.L"),
        ordering=cfg.get("ordering.kind"),
        seed=cfg.get_int("ordering.seed"),
    )
    idx = np.flatnonzero(mask)[ref.order]
    y = ds.values[idx]
    labels = None if ds.partition is None else ds.partition[idx]
    covs = [ds.covariates[k][idx] for k in sorted(ds.covariates)]
    x = None
    if covs:
        x = np.column_stack([np.ones(ref.n)] + covs)
    return ref, y, labels, x


def cmd_simulate(cfg):
    rng = np.random.default_rng(cfg.get_int("sim.seed"))
    res = cfg.get_int("sim.grid")
    coords = nsim.unit_grid(res)
    n_ref = cfg.get_int("sim.n_reference")
    n_hold = cfg.get_int("sim.n_holdout")
    n_total = coords.shape[0]
    if n_ref + n_hold > n_total:
        raise ConfigError("n_reference + n_holdout exceeds the number of grid cells")
    chosen = rng.choice(n_total, size=n_ref + n_hold, replace=False)
    gen = cfg.get("sim.generator")
    sub = coords[chosen]
    if gen == "tcopula-gamma":
        field = nsim.simulate_tcopula_gamma(
            sub, nu=cfg.get_float("sim.nu"), phi_w=cfg.get_float("sim.phi_w"),
            a0=cfg.get_float("sim.a0"), b0=cfg.get_float("sim.b0"), seed=rng,
        )
    elif gen == "gausscopula-gamma":
        field = nsim.simulate_tcopula_gamma(
            sub, nu=None, phi_w=cfg.get_float("sim.phi_w"),
            a0=cfg.get_float("sim.a0"), b0=cfg.get_float("sim.b0"), seed=rng,
        )
    elif gen == "skew-gp":
        field = nsim.simulate_skew_gp(
            sub, sigma1=cfg.get_float("sim.sigma1"), sigma2=cfg.get_float("sim.sigma2"),
            phi=cfg.get_float("sim.phi_w"), seed=rng,
        )
    elif gen == "beta-copula":
        field = nsim.simulate_beta_copula(
            sub, a0=cfg.get_float("sim.a0"), b0=cfg.get_float("sim.b0"),
            phi=cfg.get_float("sim.phi"), seed=rng,
        )
    elif gen == "nnmp-gaussian":
        ref = build_reference(sub, cfg.get_int("model.L"), ordering="random",
                              seed=cfg.get_int("sim.seed"))
        spec = models.GaussianNNMP(mu=0.0, sigma2=1.0, phi=cfg.get_float("sim.phi"))
        wp = WeightParams(gamma=(-1.5, 0.0, 0.0), kappa2=1.0, zeta=0.1)
        fr = nsim.simulate_nnmp(spec, ref, wp, seed=rng)
        vals = np.empty(sub.shape[0])
        vals[ref.order] = fr.values
        field = nsim.FieldRealization(sub, vals, "nnmp-gaussian", cfg.get_int("sim.seed"))
    else:
        raise ConfigError(f"unknown generator {gen!r}")
    values = np.full(n_total, np.nan)
    values[chosen] = field.values
    reference = np.zeros(n_total, dtype=bool)
    reference[chosen[:n_ref]] = True
    holdout = np.zeros(n_total, dtype=bool)
    holdout[chosen[n_ref:]] = True
    ds = nio.Dataset(coords=coords, values=values, holdout=holdout, reference=reference)
    out_dir = cfg.get("out.dir")
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "dataset.csv")
    nio.save_dataset(ds, path)
    nio.write_manifest(out_dir, cfg, cfg.get_int("sim.seed"),
                       extra={"generator": gen, "dataset": path, "n_rows": n_total})
    print(f"wrote {path}: {n_total} rows, {n_ref} reference, {n_hold} holdout")
    return 0


def _priors_for(cfg, kind, labels, x=None):
    n_part = 1
    if kind == "ext-skew":
        if labels is None:
            raise DataError("ext-skew family needs a partition column in the dataset")
        n_part = int(np.max(labels)) + 1
    n_cov = 3 if x is None else x.shape[1]
    base_kind = "copula-" + kind.split("-")[1] if kind.startswith("copula-") else kind
    priors = default_priors(base_kind, n_partitions=n_part, n_covariates=n_cov)
    return nio.apply_prior_overrides(cfg, priors)


def cmd_fit(cfg):
    ds, data_path = _load_dataset(cfg)
    ref, y, labels, x = _build_reference(cfg, ds)
    kind = cfg.get("model.family")
    priors = _priors_for(cfg, kind, labels, x=x if kind == "regression" else None)
    schedule = Schedule(
        iterations=cfg.get_int("mcmc.iterations"),
        burnin=cfg.get_int("mcmc.burnin"),
        thin=cfg.get_int("mcmc.thin"),
        seed=cfg.get_int("mcmc.seed"),
        adapt=bool(cfg.get_int("mcmc.adapt")),
    )
    kwargs = {}
    if kind == "ext-skew":
        kwargs["labels"] = labels
    if kind == "regression" and x is not None:
        kwargs["x"] = x
    try:
        draws = run_chain(ref, y, kind, priors=priors, schedule=schedule, **kwargs)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        raise NumericError(str(exc)) from exc
    out_dir = cfg.get("out.dir")
    nio.save_draws(out_dir, draws, cfg)
    nio.write_manifest(
        out_dir, cfg, schedule.seed,
        extra={
            "dataset_sha256": nio.file_sha256(data_path),
            "family": kind,
            "n_reference": ref.n,
            "n_draws": draws.n_draws,
        },
    )
    rates = ", ".join(f"{k}={v:.2f}" for k, v in draws.accept_rates.items())
    print(f"wrote draws to {out_dir} ({draws.n_draws} retained); acceptance: {rates}")
    return 0


def _check_artifacts(cfg, data_path, out_dir):
    manifest = nio.read_manifest(out_dir)
    if manifest.get("config_hash") != cfg.hash():
        raise ConfigError(
            "config hash mismatch: these draws were fitted under a different config"
        )
    recorded = manifest.get("dataset_sha256")
    if recorded and recorded != nio.file_sha256(data_path):
        raise DataError("dataset hash mismatch: refusing draws fitted to different data")
    return manifest


def _target_covariates(ds, mask):
    if not ds.covariates:
        return None
    cols = [ds.covariates[k][mask] for k in sorted(ds.covariates)]
    return np.column_stack([np.ones(int(mask.sum()))] + cols)


def cmd_predict(cfg):
    ds, data_path = _load_dataset(cfg)
    out_dir = cfg.get("out.dir")
    _check_artifacts(cfg, data_path, out_dir)
    draws, _ = nio.load_draws(out_dir)
    ref, y, labels, _ = _build_reference(cfg, ds)
    targets = ds.target_mask()
    if not targets.any():
        targets = ds.holdout_mask()
    if not targets.any():
        raise DataError("no prediction targets: no valueless rows and no holdout rows")
    coords = ds.coords[targets]
    grid_labels = None if ds.partition is None else ds.partition[targets]
    summary = npredict.predict_grid(
        draws, ref, y, coords, seed=cfg.get_int("predict.seed"),
        level=cfg.get_float("predict.level"), labels=labels, grid_labels=grid_labels,
        x_grid=_target_covariates(ds, targets),
    )
    lines = ["x,y,mean,median,lower,upper"]
    for j in range(coords.shape[0]):
        lines.append(
            ",".join(
                repr(float(v))
                for v in (
                    coords[j, 0], coords[j, 1], summary.mean[j], summary.median[j],
                    summary.lower[j], summary.upper[j],
                )
            )
        )
    path = os.path.join(out_dir, "predictions.csv")
    nio.atomic_write_text(path, "\n".join(lines) + "\n")
    print(f"wrote {path}: {coords.shape[0]} locations, level {summary.level}")
    return 0


def cmd_score(cfg):
    ds, data_path = _load_dataset(cfg)
    out_dir = cfg.get("out.dir")
    _check_artifacts(cfg, data_path, out_dir)
    draws, _ = nio.load_draws(out_dir)
    ref, y, labels, x = _build_reference(cfg, ds)
    mask = ds.holdout_mask()
    if not mask.any():
        raise DataError("scoring needs holdout rows with observed values")
    coords = ds.coords[mask]
    observed = ds.values[mask]
    grid_labels = None if ds.partition is None else ds.partition[mask]
    summary = npredict.predict_grid(
        draws, ref, y, coords, seed=cfg.get_int("predict.seed"),
        level=cfg.get_float("predict.level"), labels=labels, grid_labels=grid_labels,
        x_grid=_target_covariates(ds, mask), keep_draws=True,
    )
    ll_hat = loglik_at_posterior_mean(ref, y, draws, labels=labels, x=x)
    report = scoring.score_predictions(
        summary.draws, observed, level=cfg.get_float("predict.level"),
        loglik_draws=draws.loglik, loglik_at_mean=ll_hat,
    )
    nio.atomic_write_text(os.path.join(out_dir, "score_report.txt"), report.as_text())
    rows = ["site,observed,median,lower,upper,crps"]
    for row in report.as_rows():
        rows.append(",".join(repr(float(v)) if i else str(v) for i, v in enumerate(row)))
    nio.atomic_write_text(os.path.join(out_dir, "score_sites.csv"), "\n".join(rows) + "\n")
    print(report.as_text())
    return 0


def cmd_tail_bounds(cfg):
    ds, data_path = _load_dataset(cfg)
    out_dir = cfg.get("out.dir")
    _check_artifacts(cfg, data_path, out_dir)
    draws, _ = nio.load_draws(out_dir)
    kind = cfg.get("model.family")
    if not (kind.startswith("copula-") or kind == "gaussian"):
        raise ConfigError(f"tail bounds are defined for copula/gaussian families, not {kind!r}")
    ref, y, labels, _ = _build_reference(cfg, ds)
    targets = ds.target_mask()
    if not targets.any():
        targets = ds.holdout_mask()
    if not targets.any():
        raise DataError("no locations to evaluate tail bounds at")
    coords = ds.coords[targets]
    p = draws.params
    phi_bar = float(np.mean(p["phi"]))
    wp = WeightParams(
        gamma=tuple(np.mean(p["gamma"], axis=0)),
        kappa2=float(np.mean(p["kappa2"])),
        zeta=float(np.mean(p["zeta"])),
    )
    if kind.startswith("copula-"):
        _, cop, marg = kind.split("-")
        marg_obj = (
            models.Gamma(float(np.mean(p["a"])), float(np.mean(p["b"])))
            if marg == "gamma"
            else models.Beta(float(np.mean(p["a"])), float(np.mean(p["b"])))
        )
        spec = models.CopulaNNMP(copula=cop, marginal=marg_obj, phi=phi_bar)
    else:
        spec = models.GaussianNNMP(
            mu=float(np.mean(p["mu"])), sigma2=float(np.mean(p["sigma2"])), phi=phi_bar
        )
    lines = ["x,y,lower_bound,upper_bound,p0,p1"]
    for c in coords:
        q = neighbors_of_query(ref, c)
        w = site_weights(wp, q.coords, q.nbr_dist)
        tb = models.tail_lower_bounds(spec, w, q.nbr_dist)
        lines.append(
            ",".join(
                repr(float(v)) for v in (c[0], c[1], tb.lower, tb.upper, tb.p0, tb.p1)
            )
        )
    path = os.path.join(out_dir, "tail_bounds.csv")
    nio.atomic_write_text(path, "\n".join(lines) + "\n")
    print(f"wrote {path}: {coords.shape[0]} locations (posterior-mean parameters)")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="nnmix", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run-config file (key = value lines)")
    common.add_argument("--data", help="dataset csv path (overrides data.path)")
    common.add_argument("--out", help="output directory (overrides out.dir)")
    common.add_argument("--seed", type=int, help="override every seed in the config")
    fit_flags = argparse.ArgumentParser(add_help=False)
    fit_flags.add_argument("--iterations", type=int)
    fit_flags.add_argument("--burnin", type=int)
    fit_flags.add_argument("--thin", type=int)
    fit_flags.add_argument("--neighbors", type=int, help="neighbor-set cap L")
    sub.add_parser("simulate", parents=[common])
    sub.add_parser("fit", parents=[common, fit_flags])
    sub.add_parser("predict", parents=[common])
    sub.add_parser("score", parents=[common])
    sub.add_parser("tail-bounds", parents=[common])
    args = parser.parse_args(argv)
    handlers = {
        "simulate": cmd_simulate,
        "fit": cmd_fit,
        "predict": cmd_predict,
        "score": cmd_score,
        "tail-bounds": cmd_tail_bounds,
    }
    try:
        cfg = _config_from_args(args)
        return handlers[args.command](cfg)
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError) as exc:
        print(f"error[data]: {exc}", file=sys.stderr)
        return 3
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error[numeric]: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
