import math
import warnings

import numpy as np
import pytest

from slezip import MapChain, ScalingMap, pushforward_measure, run_zipper, sample_sle_driving
from slezip.errors import InvalidGridError, RangeError, UnsupportedParameterError
from slezip.zipper import (holm, increment_rate, markov_covariance_check, markov_sides,
                           slope_report, stationarity_diagnostic)


@pytest.fixture(scope="module")
def runs():
    out, _ = run_zipper(2.0, 0.1, 4, 5)
    return [r for r in out if r.flagged is None]


# -- clocks ----------------------------------------------------------------------

def test_boundary_length_starts_at_zero_and_grows(runs):
    for r in runs:
        assert r.m[0] == 0.0 and r.tau[0] == 0.0
        assert r.boundary_length(0.0) == 0.0
        assert np.all(np.diff(r.m) >= 0) and np.all(np.diff(r.tau) >= 0)
        grid = np.linspace(0, r.T, 200)
        assert np.all(np.diff(r.boundary_length(grid)) >= 0)


def test_boundary_length_is_additive(runs):
    for r in runs:
        assert r.boundary_length(r.T) == pytest.approx(r.boundary_weights.sum(), rel=1e-12)
        cuts = np.linspace(0, r.T, 7)
        parts = np.diff(r.boundary_length(cuts))
        assert parts.sum() == pytest.approx(r.boundary_length(r.T), rel=1e-12)


def test_quantum_clock_inverts_capacity(runs):
    for r in runs:
        assert r.quantum_time(r.T) == pytest.approx(r.quantum_time_total, rel=1e-12)
        tau = np.linspace(0, r.quantum_time_total, 11)[1:-1]
        assert np.allclose(r.quantum_time(r.capacity_at(tau)), tau, rtol=1e-9)
        assert np.allclose(r.m, r.m_at_quantum(r.tau), rtol=1e-9, atol=1e-15)


def test_field_constant_scales_both_clocks(runs):
    lam = 1.7
    for r in runs:
        c = 2.0 / r.gamma * math.log(lam)
        s = r.with_field_constant(c)
        assert np.allclose(s.curve_weights, lam * r.curve_weights, rtol=1e-12)
        assert np.allclose(s.boundary_weights, lam * r.boundary_weights, rtol=1e-12)
        assert s.slope == pytest.approx(r.slope, rel=1e-9)
        assert s.r2 == pytest.approx(r.r2, rel=1e-9)


def test_slope_report_fields(runs):
    rep = slope_report(runs + [runs[0].__class__(**{**runs[0].__dict__, "flagged": "test"})])
    d = rep.to_dict()
    assert {"median_R2", "slope_cv", "dropped"} <= set(d)
    assert rep.dropped == 1 and rep.used == len(runs)
    assert rep.median_R2 == pytest.approx(np.median([r.r2 for r in runs]))


def test_run_zipper_guards():
    with pytest.raises(UnsupportedParameterError):
        run_zipper(0.0, 0.1, 1, 0)
    with pytest.raises(InvalidGridError):
        run_zipper(2.0, 0.1, 0, 0)


# -- stationarity ----------------------------------------------------------------

def test_holm_against_hand_values():
    assert holm([0.01, 0.04, 0.03]).tolist() == pytest.approx([0.03, 0.06, 0.06])
    assert holm([0.5, 0.9]).tolist() == pytest.approx([1.0, 1.0])


def test_identical_checkpoints_give_zero_ks(runs):
    tau = 0.2 * min(r.quantum_time_total for r in runs)
    with pytest.warns(RuntimeWarning, match="little power"):
        rep = stationarity_diagnostic(runs, (tau, tau), delta=tau / 2)
    assert rep.ks[0, 1] == 0.0 and not rep.rejected
    assert rep.used == len(runs)


def test_increment_rate_matches_clock(runs):
    r = runs[0]
    tau = 0.25 * r.quantum_time_total
    expect = (r.m_at_quantum(2 * tau) - r.m_at_quantum(tau)) / tau
    assert increment_rate(r, tau, tau) == pytest.approx(expect)


# -- Markov covariance -----------------------------------------------------------

def test_markov_equal_times_is_empty():
    rep = markov_covariance_check(2.0, 0.05, 0.05, 10, 0, dt=1e-4)
    assert rep.passed and rep.z.size == 0
    with pytest.raises(RangeError):
        markov_covariance_check(2.0, 0.06, 0.05, 10, 0, dt=1e-4)


def test_markov_sides_scale_together():
    ch = MapChain.from_path(sample_sle_driving(2.0, 1e-4, 0.1, 3))
    edges, left, right, _ = markov_sides(ch, 0.05, 0.1, 1, 0, method="exact")
    d = 1.0 + 2.0 / 8.0
    for side in (left, right):
        a, _ = side.segment_masses(edges)
        b, _ = pushforward_measure(side, ScalingMap(2.0), d).segment_masses(edges)
        assert np.allclose(b, 2 ** d * a, rtol=1e-6, atol=0)


# -- 200-run diagnostics (shared with the acceptance suite) ----------------------

def test_stationarity_no_rejection(zipper_runs):
    runs, _ = zipper_runs
    rep = stationarity_diagnostic(runs)
    assert rep.used >= 100
    assert not rep.rejected, rep.to_dict()


def test_stationarity_detects_injected_scaling(zipper_runs, zipper_args):
    runs, _ = zipper_runs
    base = stationarity_diagnostic(runs)
    kappa, T, n, seed = zipper_args
    scale = (base.checkpoints[0] + base.delta, 1.5)
    ctl, _ = run_zipper(kappa, T, n, seed, field_scale=scale)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rep = stationarity_diagnostic(ctl, base.checkpoints, base.delta)
    assert rep.rejected, rep.to_dict()
