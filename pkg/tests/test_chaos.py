import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from slezip import (AtomicMeasure, CovarianceModel, GmcSpec, expected_mass, gmc_converged,
                    gmc_measure, invariance_check, moment_estimate, recover_reference)
from slezip.chaos import (atom_probes, exponent_curve, exponent_lebesgue, hill_tail_index,
                          multiscale_pairings)
from slezip.errors import AlignmentError, InvalidGridError, SubcriticalViolationError
from slezip.fields import FieldSample, probe_covariance, probe_means, sample_probes
from slezip.validation import q_charge

SQRT2 = math.sqrt(2)


def test_expected_mass_point_at_i():
    # K-hat(i) = log 2 for the Dirichlet field, so E = exp(0.5**2 / 2 * log 2)
    ref = AtomicMeasure(np.array([1j]), np.array([1.0]), d=0.0, support="curve")
    em = expected_mass(CovarianceModel.dirichlet(), ref, GmcSpec(0.5, "bulk", (1e-2,)))
    assert em == pytest.approx(2 ** 0.125, rel=1e-12)
    assert em == pytest.approx(1.09051, abs=1e-5)


@pytest.mark.parametrize("regime", ["bulk", "boundary"])
def test_monte_carlo_mean_matches_expected_mass(regime):
    N = CovarianceModel.neumann(0.0)
    g, eps = 0.3, 1e-2
    if regime == "boundary":
        ref = AtomicMeasure.lebesgue(1.0, 2.0, 0.05)
    else:
        x = np.linspace(-0.4, 0.4, 9) + 0.8j
        ref = AtomicMeasure(x, np.full(9, 0.1), d=2.0, support="curve")
    spec = GmcSpec(g, regime, (eps,), d=2.0 if regime == "bulk" else 1.0)
    pr = atom_probes(ref, eps, regime)
    fs = sample_probes(probe_covariance(N, pr), probe_means(N, pr), 5, size=10_000, probes=pr)
    m = gmc_measure(ref, fs, spec).total_mass()
    em = expected_mass(N, ref, spec, eps=eps)
    assert abs(m.mean() - em) < 3 * m.std() / 100


@given(st.floats(0.0, 0.9), st.integers(0, 2 ** 31))
def test_recover_inverts_gmc(g, seed):
    ref = AtomicMeasure.lebesgue(0.0, 1.0, 0.1)
    vals = np.random.default_rng(seed).normal(0, 2, (3, len(ref)))
    spec = GmcSpec(g, "boundary", (1e-2,))
    fs = FieldSample(None, vals)
    back = recover_reference(gmc_measure(ref, fs, spec), fs, spec)
    assert np.allclose(back.weights, ref.weights, rtol=1e-12, atol=0)


def test_alignment_checked():
    ref = AtomicMeasure.lebesgue(0.0, 1.0, 0.1)
    pr = atom_probes(AtomicMeasure.lebesgue(0.0, 1.0, 0.2), 1e-2, "boundary")
    with pytest.raises(AlignmentError):
        gmc_measure(ref, FieldSample(pr, np.zeros(len(pr))), GmcSpec(0.3))


def test_subcritical_guard():
    with pytest.raises(SubcriticalViolationError):
        GmcSpec(1.0, "boundary")
    with pytest.raises(SubcriticalViolationError):
        GmcSpec(SQRT2, "bulk", d=1.0)
    GmcSpec(0.999, "boundary")


def test_scale_martingale():
    # nested circle averages of the Dirichlet field at a fixed centre
    ref = AtomicMeasure(np.array([1j]), np.array([1.0]), d=0.0, support="curve")
    spec = GmcSpec(0.5, "bulk", (0.1, 0.05))
    vals = multiscale_pairings(ref, CovarianceModel.dirichlet(), spec, seed=9, replicates=10_000)
    w = [np.exp(0.5 * vals[:, k, 0]) * spec.renorm(e) for k, e in enumerate(spec.eps_schedule)]
    slope = np.polyfit(w[0], w[1], 1)[0]
    assert slope == pytest.approx(1.0, abs=0.05)


def test_gmc_converged_report():
    ref = AtomicMeasure.lebesgue(0.0, 1.0, 0.1)
    spec = GmcSpec(0.2, "boundary", (0.04, 0.02, 0.01))
    with pytest.warns(RuntimeWarning, match="not Cauchy"):
        mu, rep = gmc_converged(ref, CovarianceModel.neumann(0.0), spec, seed=1, replicates=50)
    assert not rep.converged
    assert rep.total_mass.shape == (50, 3)
    assert mu.weights.shape == (50, len(ref))
    with pytest.raises(InvalidGridError):
        gmc_converged(ref, CovarianceModel.neumann(0.0), GmcSpec(0.2, "boundary", (0.1, 0.01)), 0)


def test_moment_of_constants():
    rep = moment_estimate(np.full(2000, 1.7), 1.5)
    assert rep.estimate == pytest.approx(1.7 ** 1.5)
    assert not rep.heavy_tail


def test_hill_on_pareto():
    x = np.random.default_rng(3).pareto(2.0, 200_000) + 1.0
    assert hill_tail_index(x) == pytest.approx(2.0, rel=0.1)
    assert moment_estimate(x, 3).heavy_tail
    assert not moment_estimate(x, 1).heavy_tail


@given(st.floats(1e-3, 2.0, exclude_max=True))
def test_exponent_identities(g):
    assert abs(g * g / 4 - g / 2 * q_charge(g) + 1) < 1e-12
    assert abs(exponent_lebesgue(g)) < 1e-12
    assert abs(exponent_curve(g)) < 1e-12


def test_invariance_check_matched_is_exact():
    N = CovarianceModel.neumann(0.0)
    for eps in (1e-2, 3e-3):
        rep = invariance_check(2.0, N, SQRT2, GmcSpec(SQRT2 / 2, "boundary", (eps,)), seed=1)
        assert rep.statistic < 1e-12
    with pytest.raises(SubcriticalViolationError):
        invariance_check(2.0, N, SQRT2, GmcSpec(0.5, "boundary", (1e-2,)))


def test_invariance_check_own_decreases():
    N = CovarianceModel.neumann(0.0)
    s = [invariance_check(2.0, N, SQRT2, GmcSpec(SQRT2 / 2, "boundary", (e,)), seed=3,
                          replicates=64, mode="own").statistic for e in (1e-2, 3e-3)]
    assert s[1] < s[0]


def test_atomic_measure_segments():
    ref = AtomicMeasure.lebesgue(0.0, 1.0, 0.01)
    assert ref.total_mass() == pytest.approx(1.0)
    seg = ref.segment_masses(np.linspace(0, 1, 5))
    assert np.allclose(seg, 0.25)
    with pytest.raises(InvalidGridError):
        AtomicMeasure(np.array([0.2, 0.1]), np.ones(2))
