"""Batch driver: ``slezip <experiment> --config FILE [--seed N] [--replicates N] [--out DIR]``.

Writes ``manifest.json``, ``results/*.csv`` (plus JSON reports) and
``plot/*.dat``. Exit status 0 on success, 2 on an invalid configuration and 3
when more than half of the replicates are flagged. ``SLEZIP_MAX_WORKERS``
caps the worker pool.
"""

import argparse
from dataclasses import dataclass, field
import hashlib
import json
import math
from pathlib import Path
import sys
import time
import warnings

import numpy as np

from . import __version__
from ._pool import ENV_WORKERS, map_ordered, max_workers
from ._seeding import seed_for
from .chaos import AtomicMeasure, GmcSpec, expected_mass
from .config import EXPERIMENTS, PARAMS, ConfigError, ExperimentConfig, convert, load, parse
from .errors import SlezipError
from .fields import (CovarianceModel, ProbeSet, gaussian_factor, probe_covariance, probe_means,
                     sample_probes)
from .io import csv_text, dumps, plot_text, to_jsonable
from .loewner import MapChain, compute_trace, refine_trace, sample_sle_driving
from .natural import Window, compare_measures, expected_quantum_time, minkowski_content
from .zipper import markov_covariance_check, run_zipper, stationarity_diagnostic

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
FLAG_LIMIT = 0.5

__all__ = ["seed_for", "run", "main", "ExperimentResult", "SCHEMA_VERSION"]


@dataclass
class ExperimentResult:
    """Tables, plot data and reports of one experiment run."""

    tables: dict = field(default_factory=dict)   # name -> (columns, rows)
    plots: dict = field(default_factory=dict)    # name -> (columns, rows)
    reports: dict = field(default_factory=dict)  # name -> JSON-able
    flagged: int = 0
    total: int = 0


def _window(p):
    return Window(p.get("window_radius"), p.get("window_exclude", 0.0))


# -- replicate workers (module level so they pickle) ------------------------

def _trace_job(kappa, T, dt, eps_lift, seed):
    path = sample_sle_driving(kappa, dt, T, seed)
    tr = compute_trace(path, eps_lift=eps_lift)
    return tr


def _minkowski_job(kappa, T, dt, schedule, radius, exclude, seed):
    chain = MapChain.from_path(sample_sle_driving(kappa, dt, T, seed))
    win = Window(radius, exclude)
    tr = compute_trace(chain, stop_radius=radius)
    tr = refine_trace(chain, tr, schedule[-1] / 2.0)
    try:
        c = minkowski_content(tr, 1.0 + kappa / 8.0, schedule, window=win,
                              max_gap=schedule[-1] / 2.0)
    except SlezipError as exc:
        return None, str(exc)
    return c.areas, None


def _natural_job(kappa, t, dt, eps, replicates, segments, radius, exclude, seed):
    chain = MapChain.from_path(sample_sle_driving(kappa, dt, t, seed_for(seed, 0)))
    win = Window(radius, exclude)
    edges = np.linspace(0.0, t, segments + 1)
    try:
        tr = refine_trace(chain, compute_trace(chain), eps)
        c = minkowski_content(tr, 1.0 + kappa / 8.0, edges=edges, window=win, max_gap=eps)
        q = expected_quantum_time(None, chain, t, math.sqrt(kappa), replicates,
                                  seed_for(seed, 1), eps=eps, window=win, edges=edges)
        rep = compare_measures(q, c, edges, min_atoms=1)
    except SlezipError as exc:
        return None, str(exc)
    m, se = q.segment_masses(edges)
    return (m, se, c.contents, rep), None


def _markov_job(kappa, s, t, dt, eps, replicates, segments, seed):
    try:
        return markov_covariance_check(kappa, s, t, replicates, seed, segments=segments,
                                       eps=eps, dt=dt), None
    except SlezipError as exc:
        return None, str(exc)


# -- experiments ---------------------------------------------------------------

def _sle_trace(cfg, seeds, workers):
    p = cfg.params
    traces = map_ordered(_trace_job, [(p["kappa"], p["T"], p["dt"], p["eps_lift"], s)
                                      for s in seeds], workers)
    res = ExperimentResult(total=len(seeds))
    plot_rows = []
    for k, tr in enumerate(traces):
        rows = list(zip(tr.times, tr.points.real, tr.points.imag))
        res.tables[f"trace_{k:04d}"] = (["t", "re", "im"], rows)
        plot_rows += [(k,) + r for r in rows]
        res.flagged += int(np.any(tr.unresolved))
    res.plots["trace"] = (["replicate", "t", "re", "im"], plot_rows)
    return res


def _gff_probes(cfg, seeds, workers):
    p = cfg.params
    n = p["n_probes"]
    y = np.linspace(0.1, 2.0, n)
    model = CovarianceModel(p["variant"])
    probes = ProbeSet.bulk(1j * y, p["eps"])
    cov = probe_covariance(model, probes)
    mean = probe_means(model, probes)
    L = gaussian_factor(cov, model.psd_tol)
    vals = np.array([sample_probes(cov, mean, s, factor=L).values for s in seeds])
    res = ExperimentResult(total=len(seeds))
    res.tables["covariance"] = (["i", "j", "cov"],
                                [(i, j, cov[i, j]) for i in range(n) for j in range(n)])
    res.tables["samples"] = (["replicate", "probe", "value"],
                             [(k, i, vals[k, i]) for k in range(len(seeds)) for i in range(n)])
    emp = vals.var(axis=0, ddof=1) if len(seeds) > 1 else np.full(n, np.nan)
    res.plots["variance"] = (["y", "empirical_var", "model_var"],
                             list(zip(y, emp, np.diag(cov))))
    return res


def _gmc(cfg, seeds, workers):
    p = cfg.params
    spec = GmcSpec(p["gamma_tilde"], p["regime"], tuple(p["eps_schedule"]))
    eps = spec.eps_schedule
    ref = AtomicMeasure.lebesgue(-0.5, 0.5, 2.0 * eps[-1])
    if spec.regime == "bulk":
        ref = AtomicMeasure(ref.positions + 0.5j, ref.weights, support="curve")
    model = CovarianceModel(p["variant"])
    pos = np.asarray(ref.positions)
    if spec.regime == "boundary":
        probes = ProbeSet.boundary(np.tile(pos.real, len(eps)), np.repeat(eps, pos.size))
    else:
        probes = ProbeSet.bulk(np.tile(pos, len(eps)), np.repeat(eps, pos.size))
    cov = probe_covariance(model, probes)
    mean = probe_means(model, probes)
    L = gaussian_factor(cov, model.psd_tol)
    res = ExperimentResult(total=len(seeds))
    rows = []
    for k, s in enumerate(seeds):
        v = sample_probes(cov, mean, s, factor=L).values.reshape(len(eps), pos.size)
        for j, e in enumerate(eps):
            m = float(np.sum(ref.weights * np.exp(spec.gamma_tilde * v[j]) * spec.renorm(e)))
            rows.append((k, e, m))
            if j == len(eps) - 1 and not math.isfinite(m):
                res.flagged += 1
    res.tables["masses"] = (["replicate", "eps", "mass"], rows)
    fine = [r for r in rows if r[1] == eps[-1]]
    res.plots["masses"] = (["replicate", "mass"], [(r[0], r[2]) for r in fine])
    res.reports["gmc_report"] = {
        "expected_mass": expected_mass(model, ref, spec, eps=eps[-1]),
        "mean_mass": float(np.mean([r[2] for r in fine])), "replicates": len(fine)}
    return res


def _minkowski(cfg, seeds, workers):
    p = cfg.params
    sched = tuple(p["eps_schedule"])
    out = map_ordered(_minkowski_job, [(p["kappa"], p["T"], p["dt"], sched,
                                        p["window_radius"], p["window_exclude"], s)
                                       for s in seeds], workers)
    res = ExperimentResult(total=len(seeds))
    rows = []
    logs = []
    for k, (areas, err) in enumerate(out):
        if areas is None:
            res.flagged += 1
            continue
        d = 1.0 + p["kappa"] / 8.0
        rows += [(k, e, a, a * e ** (d - 2.0)) for e, a in zip(sched, areas)]
        logs.append(np.log(areas))
    res.tables["minkowski"] = (["replicate", "eps", "area", "content"], rows)
    if logs:
        mean_log = np.mean(logs, axis=0)
        res.plots["areas"] = (["log_eps", "mean_log_area"], list(zip(np.log(sched), mean_log)))
        slope = float(np.polyfit(np.log(sched), mean_log, 1)[0]) if len(sched) > 1 else None
        res.reports["dimension_report"] = {"slope": slope, "traces": len(logs),
                                           "target": 1.0 - p["kappa"] / 8.0}
    return res


def _natural_param(cfg, seeds, workers):
    p = cfg.params
    out = map_ordered(_natural_job, [(p["kappa"], p["t"], p["dt"], p["eps"],
                                      p["field_replicates"], p["segments"], p["window_radius"],
                                      p["window_exclude"], s) for s in seeds], workers)
    res = ExperimentResult(total=len(seeds))
    rows, plot, cvs = [], [], []
    for k, (val, err) in enumerate(out):
        if val is None:
            res.flagged += 1
            continue
        m, se, content, rep = val
        rows += [(k, j, m[j], se[j], content[j]) for j in range(m.size)]
        plot += [(k, j, r) for j, r in enumerate(rep.ratios)]
        cvs.append(rep.cv)
    res.tables["natural_param"] = (["replicate", "segment", "mu0", "mu0_se", "content"], rows)
    res.plots["ratios"] = (["replicate", "segment", "ratio"], plot)
    res.reports["proportionality_report"] = {"cv": cvs, "threshold": 0.25}
    return res


def _zipper(cfg, seeds, workers):
    p = cfg.params
    runs, rep = run_zipper(p["kappa"], p["T"], len(seeds), cfg.seed, _window(p),
                           workers=workers, dt=p["dt"], eps_curve=p["eps_curve"],
                           eps_boundary=p["eps_boundary"], n_checkpoints=p["n_checkpoints"])
    res = ExperimentResult(total=len(runs), flagged=rep.dropped)
    rows = [row for k, r in enumerate(runs) if r.flagged is None for row in r.clock_rows(k)]
    res.tables["clocks"] = (["replicate", "t", "m"], rows)
    res.plots["clocks"] = (["replicate", "t", "m"], rows)
    res.reports["slope_report"] = rep.to_dict()
    good = sum(r.flagged is None for r in runs)
    if good >= 2:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res.reports["stationarity_report"] = stationarity_diagnostic(runs).to_dict()
    return res


def _markov_check(cfg, seeds, workers):
    p = cfg.params
    out = map_ordered(_markov_job, [(p["kappa"], p["s"], p["t"], p["dt"], p["eps"],
                                     p["field_replicates"], p["segments"], s) for s in seeds],
                      workers)
    res = ExperimentResult(total=len(seeds))
    rows, plot, passed = [], [], []
    for k, (rep, err) in enumerate(out):
        if rep is None:
            res.flagged += 1
            continue
        for j in range(rep.z.size):
            rows.append((k, j, rep.left[j], rep.left_se[j], rep.right[j], rep.right_se[j],
                         rep.z[j]))
            plot.append((k, j, rep.left[j], rep.right[j]))
        passed.append(rep.passed)
    res.tables["markov"] = (["replicate", "segment", "left", "left_se", "right", "right_se",
                             "z"], rows)
    res.plots["markov"] = (["replicate", "segment", "left", "right"], plot)
    res.reports["markov_report"] = {"passed": passed, "all_passed": bool(all(passed))}
    return res


RUNNERS = {"sle-trace": _sle_trace, "gff-probes": _gff_probes, "gmc": _gmc,
           "minkowski": _minkowski, "natural-param": _natural_param, "zipper": _zipper,
           "markov-check": _markov_check}


# -- driver --------------------------------------------------------------------

def manifest_hash(config, seeds):
    """Hash of everything that determines the outputs (the output directory excluded)."""
    echo = {k: v for k, v in config.to_dict().items() if k != "out"}
    blob = json.dumps({"config": echo, "version": __version__,
                       "schema": SCHEMA_VERSION, "seeds": [str(s) for s in seeds]},
                      sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run(config, workers=None):
    """Run a validated config and write its artifacts.

    Returns
    -------
    status : int
        0, or 3 when more than half of the replicates were flagged.
    manifest : dict
    """
    config.validate()
    start = time.perf_counter()
    seeds = [seed_for(config.seed, k) for k in range(config.replicates)]
    tag = manifest_hash(config, seeds)
    out = Path(config.out)
    (out / "results").mkdir(parents=True, exist_ok=True)
    (out / "plot").mkdir(parents=True, exist_ok=True)
    res = RUNNERS[config.experiment](config, seeds, max_workers(workers))
    files = []
    stamp = [f"manifest {tag}", f"schema {SCHEMA_VERSION}"]
    for name, (cols, rows) in sorted(res.tables.items()):
        path = out / "results" / f"{name}.csv"
        path.write_text(csv_text(cols, rows, comments=stamp))
        files.append(str(path.relative_to(out)))
    for name, rep in sorted(res.reports.items()):
        path = out / "results" / f"{name}.json"
        path.write_text(dumps({"manifest": tag, "schema": SCHEMA_VERSION, **to_jsonable(rep)}))
        files.append(str(path.relative_to(out)))
    for name, (cols, rows) in sorted(res.plots.items()):
        path = out / "plot" / f"{name}.dat"
        path.write_text(plot_text(cols, rows, comments=stamp))
        files.append(str(path.relative_to(out)))
    frac = res.flagged / max(res.total, 1)
    status = EXIT_NUMERIC if frac > FLAG_LIMIT else EXIT_OK
    manifest = {"manifest_hash": tag, "schema": SCHEMA_VERSION, "version": __version__,
                "config": config.to_dict(), "seeds": [str(s) for s in seeds],
                "excluded": res.flagged, "replicates": res.total, "files": files,
                "status": status, "wall_clock_seconds": time.perf_counter() - start}
    (out / "manifest.json").write_text(dumps(manifest))
    return status, manifest


def build_parser():
    ap = argparse.ArgumentParser(prog="slezip", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="INI file with [experiment] and [params] sections")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--replicates", type=int)
    ap.add_argument("--out")
    ap.add_argument("--workers", type=int, help=f"worker processes (default ${ENV_WORKERS})")
    for key, (_, _, hlp) in PARAMS.items():
        ap.add_argument(f"--{key}", help=hlp)
    return ap


def config_from_args(args):
    if args.config:
        cfg = load(args.config)
        if cfg.experiment != args.experiment:
            raise ConfigError(f"config is for {cfg.experiment!r}, not {args.experiment!r}",
                              cfg.lines.get("name"), cfg.source)
    else:
        cfg = ExperimentConfig(args.experiment)
    for key in ("seed", "replicates", "out"):
        v = getattr(args, key)
        if v is not None:
            setattr(cfg, key, v)
            cfg.lines.pop(key, None)
    for key in PARAMS:
        v = getattr(args, key)
        if v is not None:
            try:
                cfg.params[key] = convert(key, v)
            except ValueError:
                raise ConfigError(f"cannot parse --{key} {v!r}") from None
            cfg.lines.pop(key, None)
    return cfg.validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status, manifest = run(cfg, args.workers)
    print(f"{cfg.experiment}: {manifest['replicates']} replicates, "
          f"{manifest['excluded']} excluded, output in {cfg.out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
