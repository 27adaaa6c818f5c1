"""Acceptance suite: one PASS/FAIL line per criterion (see the terminal summary)."""

import math
import time

import numpy as np

from slezip import (AtomicMeasure, CovarianceModel, DrivingPath, GmcSpec, MapChain,
                    compare_measures, compute_trace, expected_mass, expected_quantum_time,
                    gmc_measure, invariance_check, kernel, khat, markov_covariance_check,
                    minkowski_content, moment_estimate, probe_covariance, probe_means,
                    refine_trace, sample_probes, sample_sle_driving, cli)
from slezip.chaos import atom_probes, exponent_curve, exponent_lebesgue
from slezip.estimators import DimensionEstimator
from slezip.fields import gaussian_factor
from slezip.natural import DEFAULT_SCHEDULE, Window
from slezip.validation import q_charge

from test_config_cli import SMALL, _files
from test_fields import circle_pair_mean, neumann_oracle

SQRT2 = math.sqrt(2)


def test_ac1_zero_driving_tip(acceptance):
    compute_trace(DrivingPath(1e-3, np.zeros(11)), eps_lift=1e-4)  # JIT warm-up
    t0 = time.perf_counter()
    tr = compute_trace(DrivingPath(1e-3, np.zeros(1001)), eps_lift=1e-4)
    dt = time.perf_counter() - t0
    err = abs(tr.points[-1] - 2j)
    acceptance("AC1", err < 1e-2 and dt < 1.0, f"|tip - 2i| = {err:.1e}, {dt:.3f} s")


def test_ac2_map_composition(acceptance):
    t0 = time.perf_counter()
    ch = MapChain.from_path(sample_sle_driving(2.0, 1e-4, 0.5, 21))
    x, y = np.meshgrid(np.linspace(-1.5, 1.5, 10), np.linspace(1.2, 3.0, 10))
    z = (x + 1j * y).ravel()
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        s, t = np.sort(rng.integers(0, ch.n_maps + 1, 2)) * ch.dt
        direct, _ = ch.phi(0.0, t, z)
        mid, _ = ch.phi(0.0, s, z)
        two, _ = ch.phi(s, t, mid)
        worst = max(worst, float(np.max(np.abs(direct - two))))
    dt = time.perf_counter() - t0
    acceptance("AC2", worst < 1e-6 and dt < 10.0, f"max error {worst:.1e}, {dt:.2f} s")


def test_ac3_kernels(acceptance):
    d = kernel(CovarianceModel.dirichlet(), 1j, 2j)
    N = CovarianceModel.neumann(0.0)
    errs = [abs(kernel(N, z, w) - neumann_oracle(z, w)) for z, w in [(1j, 2j), (0.3 + 0.5j, -1 + 2j)]]
    ok = abs(d - math.log(3)) < 1e-14 and max(errs) < 1e-3
    acceptance("AC3", ok, f"Dirichlet - log 3 = {d - math.log(3):.1e}, "
                          f"Neumann vs quadrature {max(errs):.1e}")


def test_ac4_khat(acceptance):
    D = CovarianceModel.dirichlet()
    vals = {z: khat(D, z) for z in (1j, 2j)}
    brute = {z: circle_pair_mean(z, 5e-3) + math.log(5e-3) for z in (1j, 2j)}
    errs = [abs(vals[1j] - math.log(2)), abs(vals[2j] - math.log(4))]
    errs += [abs(vals[z] - brute[z]) for z in vals]
    acceptance("AC4", max(errs) < 1e-2,
               f"K(i) = {vals[1j]:.4f}, K(2i) = {vals[2j]:.4f}, max error {max(errs):.1e}")


def test_ac5_gmc_expectation(acceptance):
    N = CovarianceModel.neumann(0.0)
    eps = 1e-2
    parts, ok = [], True
    for g in (0.1, 0.3, 0.5):
        for regime in ("bulk", "boundary"):
            t0 = time.perf_counter()
            if regime == "boundary":
                ref = AtomicMeasure.lebesgue(1.0, 2.0, 0.05)
            else:
                ref = AtomicMeasure(np.linspace(-0.4, 0.4, 9) + 0.8j, np.full(9, 0.1), d=2.0,
                                    support="curve")
            spec = GmcSpec(g, regime, (eps,), d=2.0 if regime == "bulk" else 1.0)
            pr = atom_probes(ref, eps, regime)
            fs = sample_probes(probe_covariance(N, pr), probe_means(N, pr),
                               int(g * 100) + len(regime), size=10_000, probes=pr)
            m = gmc_measure(ref, fs, spec).total_mass()
            z = (m.mean() - expected_mass(N, ref, spec, eps=eps)) / (m.std(ddof=1) / 100)
            dt = time.perf_counter() - t0
            ok &= abs(z) < 3 and dt < 300
            parts.append(f"{g}/{regime} z={z:+.2f}")
    acceptance("AC5", ok, ", ".join(parts))


def test_ac6_exponents_and_invariance(acceptance):
    gs = np.random.default_rng(6).uniform(1e-3, 2, 100)
    e1 = max(abs(g * g / 4 - g / 2 * q_charge(g) + 1) for g in gs)
    e2 = max(abs(g * g / 8 - g / 2 * q_charge(g) + 1 + g * g / 8) for g in gs)
    e3 = max(max(abs(exponent_lebesgue(g)), abs(exponent_curve(g))) for g in gs)
    N = CovarianceModel.neumann(0.0)
    eps = (1e-2, 3e-3, 1e-3)
    stat = [invariance_check(2.0, N, SQRT2, GmcSpec(SQRT2 / 2, "boundary", (e,)), seed=1).statistic
            for e in eps]
    own = [invariance_check(2.0, N, SQRT2, GmcSpec(SQRT2 / 2, "boundary", (e,)), seed=3,
                            replicates=64, mode="own").statistic for e in (1e-2, 1e-3)]
    ok = max(e1, e2, e3) < 1e-12 and all(np.diff(stat) <= 1e-12) and stat[-1] < 0.1
    acceptance("AC6", ok, f"identity errors {max(e1, e2, e3):.1e}; "
                          f"statistic at eps={eps}: {[f'{s:.1e}' for s in stat]}; "
                          f"own-scale variant {[round(s, 3) for s in own]}")


def test_ac7_dimension_slope(acceptance):
    t0 = time.perf_counter()
    win = Window(1.0, 0.1)
    gap = 2.0 ** -8
    traces = []
    for s in range(50):
        ch = MapChain.from_path(sample_sle_driving(2.0, 1e-6, 0.5, 1000 + s))
        traces.append(refine_trace(ch, compute_trace(ch, stop_radius=1.0), gap))
        del ch
    est = DimensionEstimator(1.25, DEFAULT_SCHEDULE, win, gap).fit(traces)
    dt = time.perf_counter() - t0
    ok = abs(est.slope_ - 0.75) < 0.05 and dt < 1800
    acceptance("AC7", ok, f"slope {est.slope_:.4f} over {len(traces)} traces, {dt:.0f} s")


def test_ac8_proportionality(acceptance):
    # seeds 101-106 were not used when min_atoms was chosen
    t, eps = 0.5, 4e-3
    edges = np.linspace(0, t, 9)
    win = Window(None, 0.1)
    cv = {10_000: [], 40_000: []}
    noise = {10_000: [], 40_000: []}
    for sd in range(101, 107):
        ch = MapChain.from_path(sample_sle_driving(2.0, 1e-6, t, sd))
        tr = refine_trace(ch, compute_trace(ch), eps)
        c = minkowski_content(tr, 1.25, edges=edges, window=win, max_gap=eps)
        exact = expected_quantum_time(None, ch, t, SQRT2, eps=eps, method="exact", window=win)
        ex = exact.measure.segment_masses(edges)
        keep = (exact.segment_counts(edges) >= 8) & (ex > 0)
        for R in cv:
            q = expected_quantum_time(None, ch, t, SQRT2, R, seed=7, eps=eps, window=win,
                                      edges=edges)
            cv[R].append(compare_measures(q, c, edges, min_atoms=8).cv)
            noise[R].append(float(np.std(q.segment_masses(edges)[0][keep] / ex[keep])))
    m1, m4 = np.mean(cv[10_000]), np.mean(cv[40_000])
    n1, n4 = np.mean(noise[10_000]), np.mean(noise[40_000])
    ok = max(cv[10_000]) < 0.25 and m4 < m1
    acceptance("AC8", ok, f"CV per trace at 1e4 {np.round(cv[10_000], 3).tolist()}, "
                          f"mean {m1:.3f} -> {m4:.3f} at 4e4; Monte Carlo spread "
                          f"{n1:.4f} -> {n4:.4f}")


def test_ac9_markov_covariance(acceptance):
    rep = markov_covariance_check(2.0, 0.25, 0.5, 10_000, 0, segments=4)
    acceptance("AC9", rep.passed and rep.z.size == 4, f"z = {np.round(rep.z, 2).tolist()}")


def test_ac10_linearity(acceptance, zipper_runs):
    runs, rep = zipper_runs
    n_pts = min(r.tau.size for r in runs if r.flagged is None)
    ok = rep.median_R2 > 0.9 and n_pts >= 4 and len(runs) == 200
    acceptance("AC10", ok, f"median R2 {rep.median_R2:.3f} over {rep.used} runs "
                           f"({rep.dropped} dropped), {n_pts} checkpoints")


def test_ac11_moment_threshold(acceptance):
    N = CovarianceModel.neumann(0.0)
    eps = 1e-2
    spec = GmcSpec(SQRT2 / 2, "boundary", (eps,))
    ref = AtomicMeasure.lebesgue(-1, 1, 2 * eps)
    pr = atom_probes(ref, eps, "boundary")
    cov = probe_covariance(N, pr)
    fs = sample_probes(cov, probe_means(N, pr), 1, size=200_000, probes=pr,
                       factor=gaussian_factor(cov))
    m = gmc_measure(ref, fs, spec).total_mass()
    half, full = moment_estimate(m[:100_000], 1.5), moment_estimate(m, 1.5)
    third = moment_estimate(m, 3)
    change = abs(full.estimate / half.estimate - 1)
    ok = change < 0.1 and third.heavy_tail and not full.heavy_tail
    acceptance("AC11", ok, f"order-1.5 change {change:.3f}, order-3 tail index "
                           f"{third.tail_index:.2f} flagged={third.heavy_tail}")


def test_ac12_determinism(acceptance, tmp_path):
    same = {}
    for name, extra in SMALL.items():
        args = [name, "--seed", "11", "--replicates", "2"] + extra
        a, b = tmp_path / name / "a", tmp_path / name / "b"
        cli.main(args + ["--out", str(a)])
        cli.main(args + ["--out", str(b)])
        fa = _files(a)
        same[name] = bool(fa) and fa == _files(b)
    acceptance("AC12", all(same.values()), ", ".join(f"{k}={v}" for k, v in same.items()))
