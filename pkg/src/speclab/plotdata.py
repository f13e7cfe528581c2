"""Long-format (x, y, series) CSVs for plotting, built from a run directory."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .io import read_csv, read_kv, write_csv

# plot name -> (upstream files, command that writes them)
SOURCES = {
    "kappa_fit": (("sweep.csv", "fit_summary.txt"), "sweep"),
    "alpha_vs_measure": (("chebyshev.csv",), "cauchy"),
    "r_vs_lambda": (("localization.csv",), "agmon"),
    "delta_scaling": (("delta_scaling_raw.csv",), "sweep (with sweep.deltas set)"),
}

COLUMNS = ["x", "y", "series"]


def _kappa_fit(run: Path):
    rows = read_csv(run / "sweep.csv")
    kv = read_kv(run / "fit_summary.txt")
    lam = np.array([float(r["lambda"]) for r in rows])
    c = np.array([float(r["c_obs"]) for r in rows])
    keep = c > 1.0
    x, y = np.log(lam[keep]), np.log(np.log(c[keep]))
    out = [(a, b, "data") for a, b in zip(x, y)]
    if kv.get("kappa_hat", "") not in ("", "nan"):
        k, C = float(kv["kappa_hat"]), float(kv["C_hat"])
        lo, hi = math.log(float(kv["window_lo"])), math.log(float(kv["window_hi"]))
        out += [(t, k * t + math.log(C), "fit") for t in (lo, hi)]
        theory = kv.get("kappa_theory", "")
        if theory not in ("", "nan"):
            kt = float(theory)
            # anchor the theory slope at the fitted line's midpoint
            mid = 0.5 * (lo + hi)
            b = k * mid + math.log(C) - kt * mid
            out += [(t, kt * t + b, "theory") for t in (lo, hi)]
    return out


def _alpha(run: Path):
    rows = read_csv(run / "chebyshev.csv")
    return [(float(r["measure"]), float(r["alpha_star"]), "alpha_star") for r in rows] + \
        [(float(r["measure"]), float(r["alpha_default"]), "alpha_default") for r in rows]


def _r_vs_lambda(run: Path):
    rows = read_csv(run / "localization.csv")
    return [(float(r["lambda"]), float(r["r_min_empirical"]), "r_min") for r in rows] + \
        [(float(r["lambda"]), float(r["r_lemma"]), "r_lemma") for r in rows]


def _delta(run: Path):
    rows = read_csv(run / "delta_scaling_raw.csv")
    return [(float(r["delta"]), float(r["log_c_obs"]), "log_c_obs") for r in rows]


BUILDERS = {"kappa_fit": _kappa_fit, "alpha_vs_measure": _alpha,
            "r_vs_lambda": _r_vs_lambda, "delta_scaling": _delta}


def available(run) -> list:
    run = Path(run)
    return [k for k, (files, _) in SOURCES.items() if all((run / f).exists() for f in files)]


def emit_plot_data(run, which=None) -> dict:
    """Write ``<name>.csv`` for each requested plot (all available ones by default)."""
    run = Path(run)
    if not run.is_dir() or not any(run.iterdir()):
        raise ConfigError(f"run directory {run} is empty or missing; run a command first")
    if which is None:
        which = available(run)
        if not which:
            raise ConfigError(f"no plot sources in {run}; run sweep, cauchy or agmon first")
    out = {}
    for name in which:
        if name not in SOURCES:
            raise ConfigError(f"unknown plot {name!r}; choose from {sorted(SOURCES)}")
        files, cmd = SOURCES[name]
        missing = [f for f in files if not (run / f).exists()]
        if missing:
            raise ConfigError(f"{name}: missing {', '.join(missing)} in {run}; run '{cmd}' first")
        out[name] = write_csv(run / f"{name}.csv", COLUMNS, BUILDERS[name](run))
    return out
