"""Command-line harness.

Subcommands: ``scar``, ``fit``, ``filter``, ``sweep``, ``forecast`` and
``lorenz``.  Exit status is 0 on success, 1 on a runtime failure and 2 on a
usage or validation error.  Configuration files are TOML (``.toml``) or JSON.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .armodel import (ARModel, ModelError, TimeSeries, aic_select, constrained_yule_walker_fit,
                      is_stable, yule_walker_fit)
from .filter import FilterError, ensemble_forecast, run_kalman, write_results_csv
from .scar import SCARError, construct_scar3, scar_certificate
from .signals import (Lorenz96Config, SignalError, equilibrium_stats, fourier_mode,
                      integrate_lorenz96, load_timeseries, save_field, save_timeseries, simulate_ou)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("scarfilter")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
MODEL_KINDS = ("AR", "CAR", "SCAR3")


class UsageError(Exception):
    """Bad arguments or configuration; maps to exit status 2."""


def parse_complex(text) -> complex:
    if isinstance(text, (int, float, complex)):
        return complex(text)
    if isinstance(text, (list, tuple)) and len(text) == 2:
        return complex(float(text[0]), float(text[1]))
    s = str(text).strip().replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError:
        raise UsageError(f"cannot parse complex number {text!r}") from None


def fmt_complex(z: complex, digits: int = 4) -> str:
    sign = "-" if z.imag < 0 or (z.imag == 0 and math.copysign(1.0, z.imag) < 0) else "+"
    return f"{z.real:.{digits}f}{sign}{abs(z.imag):.{digits}f}i"


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            return json.loads(text)
        return tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _write_json(path, payload: dict, args) -> None:
    payload = dict(payload)
    if not getattr(args, "no_timestamp", False):
        payload["created"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# scar

def cmd_scar(args) -> int:
    lam = parse_complex(args.lam)
    if not lam.real < 0:
        raise UsageError("unstable continuous dynamics: need Re(lambda) < 0")
    if not args.sigma >= 0:
        raise UsageError("sigma must be nonnegative")
    cert = scar_certificate(lam, args.budget_secs)
    dt = cert.dt_hat / 2 if args.dt is None else args.dt
    if not 0 < dt < cert.dt_hat:
        raise UsageError(f"requested step outside stable-consistent interval (0, {cert.dt_hat:.6g})")
    model, _ = construct_scar3(lam, args.sigma, dt, certificate=cert)
    out = _out_dir(args.out)
    _write_json(out / args.certificate, cert.to_dict(), args)
    _write_json(out / args.model, model.to_dict(), args)

    print(f"lambda = {fmt_complex(lam, 3)}")
    print(f"s_hat = {fmt_complex(cert.s_hat)}")
    for j, a in enumerate(cert.per_dt_coefficients(), start=1):
        print(f"a{j} = ({fmt_complex(a)}) dt")
    print(f"dt_hat = {cert.dt_hat:.4f}")
    print(f"path = {cert.path}")
    print(f"dt = {dt:.4f}: " + ", ".join(f"a{j} = {fmt_complex(a)}" for j, a in enumerate(model.coeffs, 1))
          + f", Q = {model.noise_variance:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# fit

def cmd_fit(args) -> int:
    if args.method == "cyw" and args.lam is None:
        raise UsageError("--method cyw requires --lambda")
    try:
        series = load_timeseries(args.series)
    except (OSError, SignalError) as exc:
        raise UsageError(str(exc)) from None
    p = args.p
    if args.aic is not None:
        if 4 * args.aic >= len(series):
            raise UsageError(f"p_max too large: need M > 4*p_max, got M={len(series)}, p_max={args.aic}")
        p, table = aic_select(series, args.aic, jobs=args.jobs or 1)
        print("p  F(p)")
        for q in sorted(table):
            print(f"{q:<2d} {table[q]:.6g}{'  *' if q == p else ''}")
    try:
        if args.method == "yw":
            model, diag = yule_walker_fit(series, p)
        else:
            model, diag = constrained_yule_walker_fit(series, p, parse_complex(args.lam))
    except ModelError as exc:
        raise ModelError(f"fitting {args.series} with p={p}: {exc}") from exc
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, model.to_dict(), args)
    _write_json(out.with_name(out.stem + "_diagnostics.json"), diag.to_dict(), args)
    print(f"method = {args.method}, p = {p}, provenance = {model.provenance}")
    for j, a in enumerate(model.coeffs, start=1):
        print(f"a{j} = {fmt_complex(a)}")
    stable, rmax = is_stable(model)
    print(f"Q_hat = {diag.residual_variance:.6g}, F(p) = {diag.aic_value:.6g}, "
          f"max |root| = {rmax:.4f} ({'stable' if stable else 'unstable'})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# filter

def cmd_filter(args) -> int:
    try:
        model = ARModel.load(args.model)
        truth = load_timeseries(args.truth)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from None
    energy = float(np.var(truth.values))
    if (args.R is None) == (args.R_fraction is None):
        raise UsageError("give exactly one of --R and --R-fraction")
    R = args.R if args.R is not None else args.R_fraction * energy
    report, track = run_kalman(model, truth, args.n, R, seed=args.seed, energy=energy)
    out = _out_dir(args.out)
    track.write_csv(out / "track.csv")
    _write_json(out / "skill.json", {**report.to_dict(), "R": R, "n": args.n, "seed": args.seed}, args)
    print(f"prior RMSE = {report.prior_rmse:.6g}, posterior RMSE = {report.posterior_rmse:.6g}, "
          f"sqrt(R) = {math.sqrt(R):.6g}{', DIVERGED' if report.diverged else ''}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment configuration shared by sweep and forecast

@dataclass(frozen=True)
class ModelSpec:
    kind: str
    tag: str
    p: int = 3
    p_max: int | None = None
    lam: complex | None = None
    sigma: float | None = None

    @classmethod
    def parse(cls, d: dict) -> "ModelSpec":
        kind = str(d.get("kind", "")).upper().replace("-", "")
        if kind in ("AR3", "SCAR"):
            kind = {"AR3": "AR", "SCAR": "SCAR3"}[kind]
        if kind not in MODEL_KINDS:
            raise UsageError(f"unknown model kind {d.get('kind')!r}; expected one of {MODEL_KINDS}")
        p = 3 if kind == "SCAR3" else int(d.get("p", 3))
        p_max = d.get("p_max")
        lam = d.get("lambda")
        lam = None if lam in (None, "measured") else parse_complex(lam)
        if lam is not None and not lam.real < 0:
            raise UsageError("unstable continuous dynamics: need Re(lambda) < 0")
        default_tag = {"AR": f"AR-{p}", "CAR": f"CAR-{p}", "SCAR3": "SCAR-3"}[kind]
        if p_max is not None:
            default_tag = f"{kind}-aic"
        return cls(kind, d.get("tag", default_tag), p, None if p_max is None else int(p_max),
                   lam, d.get("sigma"))


@dataclass(frozen=True)
class ExperimentConfig:
    models: tuple
    dts: tuple
    ns: tuple
    R_fractions: tuple
    seeds: tuple
    truth: dict
    output: str = "sweep_out"
    tracks: bool = False
    spin_up: int = 10
    max_lag: float | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        models = tuple(ModelSpec.parse(m) for m in d.get("models", []))
        if not models:
            raise UsageError("config has no models")
        tags = [m.tag for m in models]
        if len(set(tags)) != len(tags):
            raise UsageError(f"duplicate model tags: {tags}")
        grid = d.get("grid", {})
        if "dt" in grid:
            dts = tuple(float(x) for x in grid["dt"])
        else:
            den = float(grid.get("dt_denominator", 64))
            dts = tuple(k / den for k in grid.get("dt_steps", range(1, 10)))
        ns = tuple(int(n) for n in grid.get("n", (1, 10)))
        Rs = tuple(float(r) for r in grid.get("R_fractions", (0.1, 1.0)))
        seeds = tuple(int(s) for s in grid.get("seeds", (0, 1, 2)))
        if not dts or any(not x > 0 for x in dts):
            raise UsageError("dt grid values must be positive")
        if not Rs or any(not r > 0 for r in Rs):
            raise UsageError("R fractions must be positive")
        if not ns or any(n < 1 for n in ns):
            raise UsageError("observation intervals n must be >= 1")
        if not seeds:
            raise UsageError("at least one seed is required")
        truth = dict(d.get("truth", {"source": "lorenz96"}))
        if truth.get("source", "lorenz96") not in ("lorenz96", "ou", "file"):
            raise UsageError(f"unknown truth source {truth.get('source')!r}")
        out = d.get("output", {})
        return cls(models, dts, ns, Rs, seeds, truth, out.get("dir", "sweep_out"),
                   bool(out.get("tracks", False)), int(d.get("spin_up_cycles", 10)),
                   d.get("max_lag"))


def make_truth(truth: dict, dt: float) -> TimeSeries:
    source = truth.get("source", "lorenz96")
    samples = int(truth.get("samples", 20000))
    seed = truth.get("seed", 0)
    if source == "lorenz96":
        cfg = Lorenz96Config(J=int(truth.get("J", 40)), F=float(truth.get("F", 6.0)), dt=dt,
                             spin_up=float(truth.get("spin_up", 100.0)), duration=samples * dt, seed=seed)
        return fourier_mode(integrate_lorenz96(cfg), int(truth.get("mode", 8)))
    if source == "ou":
        lam = parse_complex(truth["lambda"])
        energy = float(truth.get("energy", 1.0))
        sigma = float(truth.get("sigma", math.sqrt(2 * abs(lam.real) * energy)))
        return simulate_ou(lam, sigma, dt, samples, seed)
    series = load_timeseries(truth["path"])
    k = dt / series.dt
    if abs(k - round(k)) > 1e-9 * k or round(k) < 1:
        raise UsageError(f"dt={dt} is not a multiple of the file step {series.dt}")
    return TimeSeries(series.values[:: int(round(k))], dt, series.t0)


def build_model(spec: ModelSpec, series: TimeSeries, dt: float, certificate=None,
                max_lag: float | None = None) -> ARModel:
    """Fit or construct the model for one grid column; the data supply mean and energy."""
    if spec.kind == "AR":
        p = spec.p
        if spec.p_max is not None:
            p, _ = aic_select(series, spec.p_max)
        return yule_walker_fit(series, p)[0]
    lam = spec.lam
    energy = float(np.var(series.values))
    if lam is None:
        lam, _ = equilibrium_stats(series, max_lag).msm()
    if spec.kind == "CAR":
        return constrained_yule_walker_fit(series, spec.p, lam)[0]
    sigma = spec.sigma if spec.sigma is not None else math.sqrt(2 * abs(lam.real) * energy)
    model, _ = construct_scar3(lam, sigma, dt, certificate=certificate)
    return ARModel(model.coeffs, 0j, model.noise_variance, dt, complex(np.mean(series.values)), "SCAR")


def _sweep_column(task) -> tuple:
    """All cells sharing one ``dt``: one truth, one model per spec."""
    cfg, dt, certs = task
    truth = make_truth(cfg.truth, dt)
    energy = float(np.var(truth.values))
    rows, tracks = [], []
    for spec in cfg.models:
        try:
            model = build_model(spec, truth, dt, certs.get(spec.tag), cfg.max_lag)
            err = None
        except (ModelError, SCARError, SignalError) as exc:
            model, err = None, str(exc)
            log.warning("%s at dt=%g: %s", spec.tag, dt, exc)
        for n in cfg.ns:
            for Rf in cfg.R_fractions:
                for seed in cfg.seeds:
                    row = {"model_tag": spec.tag, "dt": dt, "n": n, "R_fraction": Rf, "seed": seed}
                    if model is None:
                        rows.append({**row, "prior_rmse": math.inf, "posterior_rmse": math.inf,
                                     "diverged": True, "error": err})
                        continue
                    try:
                        report, track = run_kalman(model, truth, n, Rf * energy, seed=seed,
                                                   energy=energy, spin_up=cfg.spin_up)
                    except FilterError as exc:
                        rows.append({**row, "prior_rmse": math.inf, "posterior_rmse": math.inf,
                                     "diverged": True, "error": str(exc)})
                        continue
                    rows.append({**row, "prior_rmse": report.prior_rmse,
                                 "posterior_rmse": report.posterior_rmse,
                                 "diverged": report.diverged, "energy": energy})
                    if cfg.tracks:
                        tracks.append((f"{spec.tag}_dt{dt:.6g}_n{n}_R{Rf:g}_s{seed}.csv", track))
    return rows, tracks


def run_sweep(cfg: ExperimentConfig, jobs: int = 1) -> list:
    """Every (model, dt, n, R, seed) cell; rows come back in grid order."""
    certs = {}
    for spec in cfg.models:
        if spec.kind == "SCAR3" and spec.lam is not None:
            certs[spec.tag] = scar_certificate(spec.lam)
    tasks = [(cfg, dt, certs) for dt in cfg.dts]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(min(jobs, len(tasks))) as ex:
            results = list(ex.map(_sweep_column, tasks))
    else:
        results = [_sweep_column(t) for t in tasks]
    return results


def _default_jobs(args) -> int:
    return args.jobs if args.jobs else (os.cpu_count() or 1)


def cmd_sweep(args) -> int:
    cfg = ExperimentConfig.from_dict(load_config(args.config))
    if args.out:
        cfg = ExperimentConfig(**{**cfg.__dict__, "output": args.out})
    out = _out_dir(cfg.output)
    results = run_sweep(cfg, _default_jobs(args))
    rows = []
    for col_rows, tracks in results:
        rows.extend(col_rows)
        if tracks:
            tdir = _out_dir(out / "tracks")
            for name, track in tracks:
                track.write_csv(tdir / name)
    order = {spec.tag: i for i, spec in enumerate(cfg.models)}
    rows.sort(key=lambda r: (order[r["model_tag"]], r["dt"], r["n"], r["R_fraction"], r["seed"]))
    write_results_csv(rows, out / "results.csv")
    summary = {"cells": len(rows), "version": __version__, "models": {}}
    for spec in cfg.models:
        mine = [r for r in rows if r["model_tag"] == spec.tag]
        above = sum(1 for r in mine if not r["diverged"]
                    and r["posterior_rmse"] >= math.sqrt(r["R_fraction"] * r["energy"]))
        summary["models"][spec.tag] = {"cells": len(mine), "diverged": sum(r["diverged"] for r in mine),
                                       "posterior_above_obs_error": above}
        print(f"{spec.tag:>8s}: {len(mine)} cells, {summary['models'][spec.tag]['diverged']} diverged, "
              f"{above} with posterior RMSE >= sqrt(R)")
    _write_json(out / "summary.json", summary, args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# forecast

def _forecast_series(cfg: dict, out: Path) -> TimeSeries:
    if "series" in cfg:
        try:
            return load_timeseries(cfg["series"])
        except (OSError, SignalError) as exc:
            raise UsageError(str(exc)) from None
    syn = cfg.get("synthetic")
    if syn is None:
        raise UsageError("forecast needs a series file or a [synthetic] table")
    lam = parse_complex(syn.get("lambda", "-0.4458+3.7161i"))
    energy = float(syn.get("energy", 1.0))
    dt = float(syn.get("dt", 12.0 / 365.0))
    days = int(syn.get("days", 4000))
    seed = int(syn.get("seed", 0))
    truth = simulate_ou(lam, math.sqrt(2 * abs(lam.real) * energy), dt, days, seed)
    rng = np.random.default_rng(seed + 1)
    R = float(syn.get("R", 0.02))
    noisy = truth.values + math.sqrt(R / 2) * (rng.standard_normal(days) + 1j * rng.standard_normal(days))
    series = TimeSeries(noisy, dt)
    save_timeseries(series, out / "series.csv")
    return series


def run_forecast(cfg: dict, out: Path, args=None) -> dict:
    series = _forecast_series(cfg, out)
    specs = [ModelSpec.parse(m) for m in cfg.get("models", [{"kind": "SCAR3"}, {"kind": "AR", "p": 3}])]
    if not specs:
        raise UsageError("config has no models")
    lead = int(cfg.get("lead_days", 15))
    train = int(cfg.get("train", len(series) // 2))
    if train < 50 or train + lead >= len(series):
        raise UsageError(f"window exceeds data: train={train}, lead={lead}, length={len(series)}")
    enkf = cfg.get("enkf", {})
    training = TimeSeries(series.values[:train], series.dt, series.t0)
    results = {}
    pcs = {}
    for spec in specs:
        model = build_model(spec, training, series.dt, None, cfg.get("max_lag"))
        run = ensemble_forecast(model, series, train, lead, size=int(enkf.get("size", 50)),
                                R0=enkf.get("R0"), adaptive=bool(enkf.get("adaptive", True)),
                                mode=enkf.get("mode", "continuous"),
                                forgetting=float(enkf.get("forgetting", 0.99)),
                                seed=int(enkf.get("seed", 0)),
                                inflation=float(enkf.get("inflation", 1.0)))
        run.track.write_csv(out / f"track_{spec.tag}.csv")
        pcs[spec.tag] = [pc for _, pc in run.report.pattern_correlation_curve]
        results[spec.tag] = {"R_final": run.R_final, **run.report.to_dict(),
                             "coeffs": [[a.real, a.imag] for a in model.coeffs]}
    with open(out / "pc.csv", "w") as fh:
        fh.write("lead," + ",".join(pcs) + "\n")
        for k in range(lead + 1):
            fh.write(f"{k}," + ",".join(repr(float(pcs[t][k])) for t in pcs) + "\n")
    return results


def cmd_forecast(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    if args.series:
        cfg["series"] = args.series
    if args.lead is not None:
        cfg["lead_days"] = args.lead
    if args.train is not None:
        cfg["train"] = args.train
    out = _out_dir(args.out or cfg.get("output", {}).get("dir", "forecast_out"))
    results = run_forecast(cfg, out, args)
    _write_json(out / "summary.json", results, args)
    tags = list(results)
    print("lead  " + "  ".join(f"{t:>8s}" for t in tags))
    lead = len(results[tags[0]]["pattern_correlation"]) - 1
    for k in range(lead + 1):
        print(f"{k:>4d}  " + "  ".join(f"{results[t]['pattern_correlation'][k][1]:8.4f}" for t in tags))
    for t in tags:
        print(f"{t}: R_hat = {results[t]['R_final']:.4g}, posterior RMSE = {results[t]['posterior_rmse']:.4g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# lorenz

def cmd_lorenz(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    l96 = dict(cfg.get("lorenz96", {}))
    for key in ("F", "J", "dt", "duration", "spin_up", "seed"):
        val = getattr(args, key)
        if val is not None:
            l96[key] = val
    if args.zero_initial:
        l96["initial"] = [0.0] * int(l96.get("J", 40))
    modes = args.modes or cfg.get("modes", [1, 8])
    max_lag = args.max_lag if args.max_lag is not None else cfg.get("max_lag")
    try:
        config = Lorenz96Config.from_dict(l96)
    except (SignalError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args.out or cfg.get("output", {}).get("dir", "lorenz_out"))
    traj = integrate_lorenz96(config)
    if not args.no_trajectory:
        save_field(traj, out / "trajectory.csv")
    status = EXIT_OK
    for k in modes:
        u = fourier_mode(traj, int(k))
        save_timeseries(u, out / f"mode{k}.csv")
        try:
            stats = equilibrium_stats(u, max_lag)
        except SignalError as exc:
            print(f"mode {k}: {exc}", file=sys.stderr)
            status = EXIT_RUNTIME
            continue
        _write_json(out / f"stats_mode{k}.json", {"mode": int(k), **stats.to_dict()}, args)
        with open(out / f"acf_mode{k}.csv", "w") as fh:
            fh.write("lag,re,im,abs\n")
            for j, c in enumerate(stats.acf):
                fh.write(",".join(repr(float(x)) for x in (j * stats.dt, c.real, c.imag, abs(c))) + "\n")
        line = f"mode {k}: E = {stats.energy:.4f}, T = {fmt_complex(stats.correlation_time)}"
        try:
            lam, sigma = stats.msm()
        except ModelError as exc:
            print(f"{line}: {exc}", file=sys.stderr)
            status = EXIT_RUNTIME
            continue
        print(f"{line}, lambda = {fmt_complex(lam)}, sigma = {sigma:.4f}")
    return status


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes for sweeps and AIC fits (default: number of cores)")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit the 'created' field from JSON outputs so reruns are bit-identical")
    common.add_argument("-v", "--verbose", action="count", default=0)

    ap = argparse.ArgumentParser(prog="scarfilter", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scar", parents=[common], help="build a SCAR-3 certificate and model")
    p.add_argument("--lambda", dest="lam", required=True, help="complex decay rate, e.g. -8.312-8.569i")
    p.add_argument("--sigma", type=float, default=1.0, help="noise amplitude; Q = sigma^2 dt (default 1)")
    p.add_argument("--dt", type=float, default=None, help="model step (default dt_hat/2)")
    p.add_argument("--budget-secs", type=float, default=None,
                   help="exact elimination budget before the numeric fallback (env SCAR_BUDGET_SECS, default 240)")
    p.add_argument("--out", default=".", help="output directory (default .)")
    p.add_argument("--certificate", default="scar_certificate.json")
    p.add_argument("--model", default="scar_model.json")
    p.set_defaults(func=cmd_scar)

    p = sub.add_parser("fit", parents=[common], help="Yule-Walker or constrained fit of a series")
    p.add_argument("series", help="CSV with t,re,im or date,rmm1,rmm2")
    p.add_argument("--method", choices=("yw", "cyw"), default="yw")
    p.add_argument("--p", type=int, default=3, help="model order (default 3)")
    p.add_argument("--lambda", dest="lam", default=None, help="decay rate for the constrained fit")
    p.add_argument("--aic", type=int, default=None, metavar="PMAX", help="select p in 1..PMAX by F(p)")
    p.add_argument("--out", default="model.json")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("filter", parents=[common], help="one Kalman filtering twin experiment")
    p.add_argument("--model", required=True, help="model JSON")
    p.add_argument("--truth", required=True, help="truth series CSV sampled at the model dt")
    p.add_argument("--n", type=int, default=1, help="observation interval in model steps (default 1)")
    p.add_argument("--R", type=float, default=None, help="observation noise variance")
    p.add_argument("--R-fraction", dest="R_fraction", type=float, default=None,
                   help="observation noise variance as a fraction of the truth energy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="filter_out")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("sweep", parents=[common], help="filtering skill over a (model, dt, n, R) grid")
    p.add_argument("config", help="TOML or JSON experiment config")
    p.add_argument("--out", default=None, help="override the output directory")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("forecast", parents=[common], help="EnKF assimilation and lead-time forecasts")
    p.add_argument("--config", default=None, help="TOML or JSON forecast config")
    p.add_argument("--series", default=None, help="complex or RMM series CSV")
    p.add_argument("--lead", type=int, default=None, help="maximum lead in samples/days (default 15)")
    p.add_argument("--train", type=int, default=None, help="training window length (default half)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("lorenz", parents=[common], help="Lorenz-96 trajectory, Fourier modes and statistics")
    p.add_argument("--config", default=None)
    p.add_argument("--F", type=float, default=None, help="forcing (default 6)")
    p.add_argument("--J", type=int, default=None, help="dimension (default 40)")
    p.add_argument("--dt", type=float, default=None, help="sampling step (default 1/64); RK4 step is dt/4")
    p.add_argument("--duration", type=float, default=None, help="recorded time (default 100)")
    p.add_argument("--spin-up", dest="spin_up", type=float, default=None, help="discarded time (default 100)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--modes", type=int, nargs="*", default=None, help="wavenumbers (default 1 8)")
    p.add_argument("--max-lag", dest="max_lag", type=float, default=None,
                   help="ACF integration window (default: first lag with |acf| < 0.01)")
    p.add_argument("--zero-initial", action="store_true", help="start from the zero state")
    p.add_argument("--no-trajectory", action="store_true", help="skip the full trajectory file")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_lorenz)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, SCARError, FilterError, SignalError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
