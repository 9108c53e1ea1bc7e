"""Dataset and config persistence.

The dataset format is a delimited text file with a header row: columns
``x, y, value`` first, then optional covariate columns, and the optional
``partition``, ``holdout``, and ``reference`` flag columns. ``value`` may be
empty on rows that only mark prediction targets. Floats are written with
``repr`` so a save/load round trip is bit exact.

Run configuration is a flat ``key = value`` file with dotted section names
(two levels at most). Unknown keys are rejected before any computation.
All artifacts carry the hash of the canonicalized config, and fit manifests
record the dataset hash so downstream commands can refuse mismatched inputs.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .mcmc import (
    FlatPrior,
    GammaPrior,
    InvGammaPrior,
    MVNormalPrior,
    NormalPrior,
)


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


class NumericError(RuntimeError):
    pass


RESERVED_COLUMNS = ("x", "y", "value", "partition", "holdout", "reference")


@dataclass
class Dataset:
    coords: np.ndarray
    values: np.ndarray
    covariates: dict = field(default_factory=dict)
    partition: np.ndarray | None = None
    holdout: np.ndarray | None = None
    reference: np.ndarray | None = None

    @property
    def n(self):
        return self.coords.shape[0]

    def reference_mask(self):
        """Rows used for fitting: the reference flag, else valued non-holdout rows."""
        has_value = np.isfinite(self.values)
        if self.reference is not None:
            return self.reference.astype(bool) & has_value
        if self.holdout is not None:
            return has_value & ~self.holdout.astype(bool)
        return has_value

    def holdout_mask(self):
        if self.holdout is None:
            return np.zeros(self.n, dtype=bool)
        return self.holdout.astype(bool) & np.isfinite(self.values)

    def target_mask(self):
        """Rows with coordinates but no observed value (prediction targets)."""
        return ~np.isfinite(self.values)


def _parse_float(text, path, lineno, col):
    text = text.strip()
    if text == "":
        return np.nan
    try:
        return float(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: column {col!r}: not a number: {text!r}") from None


def load_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise DataError(f"{path}: empty file, expected a header row")
        header = [h.strip() for h in header_line.rstrip("\n").split(",")]
        if header[:3] != ["x", "y", "value"]:
            raise DataError(f"{path}:1: header must start with x,y,value, got {header[:3]}")
        extra = header[3:]
        rows = []
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}"
                )
            rows.append((lineno, parts))
    n = len(rows)
    coords = np.empty((n, 2))
    values = np.empty(n)
    extras = {name: np.empty(n) for name in extra}
    for k, (lineno, parts) in enumerate(rows):
        coords[k, 0] = _parse_float(parts[0], path, lineno, "x")
        coords[k, 1] = _parse_float(parts[1], path, lineno, "y")
        if not np.isfinite(coords[k]).all():
            raise DataError(f"{path}:{lineno}: missing or non-finite coordinate")
        values[k] = _parse_float(parts[2], path, lineno, "value")
        for j, name in enumerate(extra):
            extras[name][k] = _parse_float(parts[3 + j], path, lineno, name)
    partition = extras.pop("partition", None)
    holdout = extras.pop("holdout", None)
    reference = extras.pop("reference", None)
    if partition is not None:
        partition = partition.astype(np.int64)
    return Dataset(
        coords=coords,
        values=values,
        covariates=extras,
        partition=partition,
        holdout=None if holdout is None else holdout.astype(bool),
        reference=None if reference is None else reference.astype(bool),
    )


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if v is None or (isinstance(v, float) and not np.isfinite(v)):
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    return "" if not np.isfinite(f) else repr(f)


def save_dataset(ds: Dataset, path):
    header = ["x", "y", "value"]
    cols = [ds.coords[:, 0], ds.coords[:, 1], ds.values]
    for name, arr in ds.covariates.items():
        header.append(name)
        cols.append(arr)
    for name in ("partition", "holdout", "reference"):
        arr = getattr(ds, name)
        if arr is not None:
            header.append(name)
            cols.append(arr)
    lines = [",".join(header)]
    for k in range(ds.n):
        lines.append(",".join(_fmt(col[k]) for col in cols))
    atomic_write_text(path, "\n".join(lines) + "\n")


def atomic_write_text(path, text):
    """Write via a temp file in the same directory and rename into place."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# run configuration

_KNOWN_KEYS = {
    "model.family",
    "model.L",
    "ordering.kind",
    "ordering.seed",
    "mcmc.iterations",
    "mcmc.burnin",
    "mcmc.thin",
    "mcmc.seed",
    "mcmc.adapt",
    "prior.gamma_mean",
    "prior.gamma_var",
    "prior.kappa2",
    "prior.zeta",
    "prior.phi",
    "prior.sigma2",
    "prior.tau2",
    "prior.mu",
    "prior.lam",
    "prior.a",
    "prior.b",
    "prior.beta",
    "predict.level",
    "predict.seed",
    "sim.generator",
    "sim.grid",
    "sim.n_reference",
    "sim.n_holdout",
    "sim.seed",
    "sim.nu",
    "sim.phi_w",
    "sim.phi",
    "sim.a0",
    "sim.b0",
    "sim.sigma1",
    "sim.sigma2",
    "tail.q",
    "data.path",
    "out.dir",
}

_DEFAULTS = {
    "model.family": "gaussian",
    "model.L": "10",
    "ordering.kind": "random",
    "ordering.seed": "0",
    "mcmc.iterations": "30000",
    "mcmc.burnin": "10000",
    "mcmc.thin": "10",
    "mcmc.seed": "0",
    "mcmc.adapt": "1",
    "predict.level": "0.95",
    "predict.seed": "0",
    "sim.generator": "tcopula-gamma",
    "sim.grid": "200",
    "sim.n_reference": "2000",
    "sim.n_holdout": "500",
    "sim.seed": "0",
    "sim.nu": "10",
    "sim.phi_w": "0.08333333333333333",
    "sim.phi": "0.1",
    "sim.a0": "2",
    "sim.b0": "2",
    "sim.sigma1": "10",
    "sim.sigma2": "1",
    "tail.q": "0.99",
    "out.dir": "out",
}


@dataclass
class RunConfig:
    entries: dict

    @classmethod
    def from_file(cls, path):
        entries = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, _, val = line.partition("=")
                key = key.strip()
                if key not in _KNOWN_KEYS:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                entries[key] = val.strip()
        return cls(entries)

    @classmethod
    def from_entries(cls, entries=None):
        bad = set(entries or {}) - _KNOWN_KEYS
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        return cls(dict(entries or {}))

    def override(self, key, value):
        if value is None:
            return
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        self.entries[key] = str(value)

    def get(self, key):
        if key in self.entries:
            return self.entries[key]
        if key in _DEFAULTS:
            return _DEFAULTS[key]
        raise ConfigError(f"missing required config key {key!r}")

    def get_int(self, key):
        try:
            return int(self.get(key))
        except ValueError:
            raise ConfigError(f"config key {key!r} must be an integer") from None

    def get_float(self, key):
        try:
            return float(self.get(key))
        except ValueError:
            raise ConfigError(f"config key {key!r} must be a number") from None

    def canonical(self):
        keys = sorted(set(_DEFAULTS) | set(self.entries))
        return "\n".join(f"{k} = {self.entries.get(k, _DEFAULTS.get(k, ''))}" for k in keys) + "\n"

    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def prior_override(self, key):
        """Parse 'invgamma 3 0.2' style prior entries; None when absent."""
        if key not in self.entries:
            return None
        parts = self.entries[key].split()
        kind = parts[0].lower()
        args = [float(p) for p in parts[1:]]
        if kind == "invgamma" and len(args) == 2:
            return InvGammaPrior(*args)
        if kind == "gamma" and len(args) == 2:
            return GammaPrior(*args)
        if kind == "normal" and len(args) == 2:
            return NormalPrior(args[0], args[1])
        if kind == "flat" and not args:
            return FlatPrior()
        raise ConfigError(f"cannot parse prior spec {self.entries[key]!r} for {key!r}")


def apply_prior_overrides(cfg: RunConfig, priors):
    """Overlay config prior entries onto a default PriorBlock."""
    if "prior.gamma_mean" in cfg.entries or "prior.gamma_var" in cfg.entries:
        mean = tuple(
            float(v) for v in cfg.entries.get("prior.gamma_mean", "-1.5 0 0").split()
        )
        var = tuple(float(v) for v in cfg.entries.get("prior.gamma_var", "2 2 2").split())
        if len(mean) != 3 or len(var) != 3:
            raise ConfigError("prior.gamma_mean / prior.gamma_var need 3 numbers each")
        priors.gamma = MVNormalPrior(mean, var)
    for name in ("kappa2", "zeta"):
        p = cfg.prior_override(f"prior.{name}")
        if p is not None:
            setattr(priors, name, p)
    for name in ("phi", "sigma2", "tau2", "mu", "lam", "a", "b", "beta"):
        p = cfg.prior_override(f"prior.{name}")
        if p is not None:
            priors.theta[name] = p
    return priors


def write_manifest(out_dir, cfg: RunConfig, seed, extra=None):
    lines = [f"config_hash = {cfg.hash()}", f"seed = {seed}"]
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {v}")
    atomic_write_text(os.path.join(out_dir, "manifest.txt"), "\n".join(lines) + "\n")


def read_manifest(out_dir):
    path = os.path.join(out_dir, "manifest.txt")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out


def save_draws(out_dir, draws, cfg: RunConfig):
    """Write parameter draws, latent t, and chain metadata as delimited text."""
    os.makedirs(out_dir, exist_ok=True)
    cols = []
    names = []
    for name, arr in draws.params.items():
        arr = np.asarray(arr)
        if arr.ndim == 1:
            names.append(name)
            cols.append(arr)
        else:
            for j in range(arr.shape[1]):
                names.append(f"{name}{j}")
                cols.append(arr[:, j])
    names.append("loglik")
    cols.append(draws.loglik)
    lines = [",".join(names)]
    for k in range(draws.n_draws):
        lines.append(",".join(repr(float(c[k])) for c in cols))
    atomic_write_text(os.path.join(out_dir, "draws_params.csv"), "\n".join(lines) + "\n")
    t_lines = [",".join(f"t{j}" for j in range(draws.latent_t.shape[1]))]
    for k in range(draws.n_draws):
        t_lines.append(",".join(repr(float(v)) for v in draws.latent_t[k]))
    atomic_write_text(os.path.join(out_dir, "draws_latent_t.csv"), "\n".join(t_lines) + "\n")
    meta = [
        f"family = {draws.family}",
        f"L = {draws.L}",
        f"start = {draws.start}",
        f"iterations = {draws.schedule.iterations}",
        f"burnin = {draws.schedule.burnin}",
        f"thin = {draws.schedule.thin}",
        f"seed = {draws.schedule.seed}",
        f"config_hash = {cfg.hash()}",
    ]
    for name, rate in draws.accept_rates.items():
        meta.append(f"accept.{name} = {rate!r}")
    atomic_write_text(os.path.join(out_dir, "chain_meta.txt"), "\n".join(meta) + "\n")


def load_draws(out_dir):
    """Rebuild a ChainDraws from the delimited files written by save_draws."""
    from .mcmc import ChainDraws, Schedule

    meta = {}
    with open(os.path.join(out_dir, "chain_meta.txt"), encoding="utf-8") as fh:
        for line in fh:
            key, _, val = line.strip().partition("=")
            meta[key.strip()] = val.strip()
    with open(os.path.join(out_dir, "draws_params.csv"), encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        body = np.array(
            [[float(tok) for tok in line.split(",")] for line in fh if line.strip()]
        ).reshape(-1, len(header))
    params = {}
    j = 0
    while j < len(header):
        name = header[j]
        base = name.rstrip("0123456789")
        if base != name and base in ("gamma", "beta", "lambdas", "z", "t"):
            width = 0
            while j + width < len(header) and header[j + width] == f"{base}{width}":
                width += 1
            params[base] = body[:, j : j + width]
            j += width
        else:
            params[name] = body[:, j]
            j += 1
    loglik = params.pop("loglik")
    with open(os.path.join(out_dir, "draws_latent_t.csv"), encoding="utf-8") as fh:
        t_header = fh.readline().strip().split(",")
        latent_t = np.array(
            [[float(tok) for tok in line.split(",")] for line in fh if line.strip()]
        ).reshape(-1, len(t_header))
    schedule = Schedule(
        iterations=int(meta["iterations"]),
        burnin=int(meta["burnin"]),
        thin=int(meta["thin"]),
        seed=int(meta["seed"]),
    )
    accept = {
        k[len("accept.") :]: float(v) for k, v in meta.items() if k.startswith("accept.")
    }
    return ChainDraws(
        family=meta["family"],
        params=params,
        latent_t=latent_t,
        loglik=loglik,
        accept_rates=accept,
        schedule=schedule,
        L=int(meta["L"]),
        start=int(meta["start"]),
    ), meta
