import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import upper_sqrt
from slezip import DrivingPath, MapChain, compute_trace, refine_trace, sample_sle_driving
from slezip.errors import InvalidGridError, PointInHullError, RangeError, UnsupportedParameterError
from slezip.loewner import (hull_capacity_check, solve_forward, unzip_map, unzipped_trace,
                            zip_map)


def zero_chain(T=1.0, dt=1e-3, c=0.0):
    n = int(round(T / dt))
    return MapChain.from_path(DrivingPath(dt, np.full(n + 1, c)))


# -- driving paths -------------------------------------------------------------

def test_driving_is_deterministic_per_seed():
    a = sample_sle_driving(2.0, 1e-3, 1.0, 5)
    b = sample_sle_driving(2.0, 1e-3, 1.0, 5)
    c = sample_sle_driving(2.0, 1e-3, 1.0, 6)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert a.n_steps == 1000 and a.values[0] == 0.0


def test_driving_increment_variance():
    p = sample_sle_driving(3.0, 1e-4, 10.0, 1)
    inc = np.diff(p.values)
    # chi-square interval for the sample variance, n = 1e5
    ratio = inc.var() / (3.0 * 1e-4)
    assert abs(ratio - 1.0) < 4.0 * math.sqrt(2.0 / inc.size)


@pytest.mark.parametrize("kappa", [-0.1, 4.0, 8.0, math.nan])
def test_driving_rejects_kappa(kappa):
    with pytest.raises((UnsupportedParameterError, ValueError)):
        sample_sle_driving(kappa, 1e-3, 1.0, 0)


def test_driving_rejects_short_horizon():
    with pytest.raises(InvalidGridError):
        sample_sle_driving(2.0, 1e-2, 1e-3, 0)


# -- closed forms for constant driving ---------------------------------------------

@pytest.mark.parametrize("c", [0.0, 0.7])
def test_forward_matches_constant_driving(c):
    ch = zero_chain(T=0.5, dt=1e-3, c=c)
    z = np.array([0.3 + 0.2j, -1 + 1j, 2 + 0.01j, 5j])
    g, dg = ch.forward(z, 0, ch.n_maps)
    exact = c + upper_sqrt((z - c) ** 2 + 4 * 0.5)
    assert np.max(np.abs(g - exact)) < 1e-12
    assert np.max(np.abs(dg - (z - c) / (exact - c))) < 1e-10


def test_zero_driving_tip():
    lift = 1e-4
    tr = compute_trace(zero_chain(1.0, 1e-3), times=[0.25, 1.0], eps_lift=lift)
    exact = 1j * np.sqrt(4 * np.array([0.25, 1.0]) + lift ** 2)
    assert np.max(np.abs(tr.points - exact)) < 1e-10


def test_feet_of_vertical_slit():
    ch = zero_chain(1.0, 1e-3)
    for s, t in [(0.0, 1.0), (0.25, 0.5), (0.5, 0.5)]:
        assert ch.right_foot(s, t) == pytest.approx(2 * math.sqrt(t - s), abs=1e-12)
        assert ch.left_foot(s, t) == pytest.approx(-2 * math.sqrt(t - s), abs=1e-12)


def test_swallowed_point_raises():
    ch = zero_chain(1.0, 1e-3)
    with pytest.raises(PointInHullError):
        ch.forward(np.array([0.5j]), 0, ch.n_maps)


def test_capacity_from_expansion(sle_chain):
    assert hull_capacity_check(sle_chain) == pytest.approx(sle_chain.capacity, rel=1e-4)


def test_index_off_grid():
    ch = zero_chain(1.0, 1e-3)
    with pytest.raises(InvalidGridError):
        ch.index(0.00015)
    with pytest.raises(RangeError):
        ch.index(2.0)


# -- maps ----------------------------------------------------------------------

def test_forward_inverse_roundtrip(sle_chain):
    z = np.array([0.5 + 0.5j, -0.3 + 1.2j, 2 + 0.3j])
    g = solve_forward(sle_chain, z)
    back, _ = sle_chain.inverse(g, 0, sle_chain.n_maps)
    assert np.max(np.abs(back - z)) < 1e-9


def test_tree_inverse_matches_exact(sle_chain):
    w = np.linspace(-1, 1, 11) + 0.05j
    a, da = sle_chain.inverse(w, 0, sle_chain.n_maps)
    b, db = sle_chain.inverse_exact(w, 0, sle_chain.n_maps)
    assert np.max(np.abs(a - b)) < 1e-9
    assert np.max(np.abs(da / db - 1)) < 1e-7


def test_zip_unzip_roundtrip(sle_chain):
    z = np.array([0.4 + 0.7j, -0.5 + 0.2j])
    u, du = unzip_map(sle_chain, 0.1, 0.4, z)
    v, dv = zip_map(sle_chain, 0.4, 0.1, u)
    assert np.max(np.abs(v - z)) < 1e-9
    assert np.max(np.abs(du * dv - 1)) < 1e-8
    with pytest.raises(InvalidGridError):
        unzip_map(sle_chain, 0.4, 0.1, z)


def test_composition(sle_chain):
    rng = np.random.default_rng(0)
    z = rng.uniform(-1, 1, 30) + 1j * rng.uniform(0.2, 1.5, 30)
    for _ in range(5):
        s, t = np.sort(rng.integers(0, sle_chain.n_maps + 1, 2)) * sle_chain.dt
        direct, _ = sle_chain.phi(0.0, t, z)
        mid, _ = sle_chain.phi(0.0, s, z)
        two, _ = sle_chain.phi(s, t, mid)
        assert np.max(np.abs(direct - two)) < 1e-9


def test_unzipped_trace_is_image_of_trace(sle_chain):
    s = 0.2
    tr = compute_trace(sle_chain)
    un = unzipped_trace(sle_chain, s)
    k = sle_chain.index(s)
    img, _ = sle_chain.phi(0.0, s, tr.points[k + 100: k + 400])
    assert np.median(np.abs(img - un.points[100:400])) < 1e-3


@given(st.integers(0, 10_000), st.sampled_from([0.5, 2.0, 3.0]))
def test_brownian_rescaling(seed, lam):
    p = sample_sle_driving(2.0, 1e-3, 0.2, seed)
    a = compute_trace(p, eps_lift=1e-4)
    b = compute_trace(p.rescaled(lam), eps_lift=1e-4 / lam)
    assert np.allclose(b.points, a.points / lam, rtol=1e-9, atol=1e-12)
    assert np.allclose(b.times, a.times / lam ** 2)


@given(st.integers(0, 10_000))
def test_feet_bracket_real_images(seed):
    ch = MapChain.from_path(sample_sle_driving(2.0, 1e-3, 0.2, seed))
    m, n = 50, ch.n_maps
    s, t = m * ch.dt, n * ch.dt
    r, lft = ch.right_foot(s, t), ch.left_foot(s, t)
    assert lft < 0.0 < r
    x = ch.W[m] + np.array([-1e-9, 1e-9])
    img = ch.forward_real(x, m, n) - ch.W[n]
    assert r >= img[1] - 1e-9 and lft <= img[0] + 1e-9


@given(st.integers(0, 10_000))
def test_refine_trace_closes_gaps(seed):
    ch = MapChain.from_path(sample_sle_driving(2.0, 1e-3, 0.3, seed))
    tr = compute_trace(ch)
    fine = refine_trace(ch, tr, 5e-3, max_points=1 << 15)
    assert np.max(np.abs(np.diff(fine.points))) <= 5e-3
    assert np.all(np.diff(fine.times) >= 0)
    assert np.isin(tr.points, fine.points).all()


def test_refine_trace_point_cap():
    ch = MapChain.from_path(sample_sle_driving(2.0, 1e-3, 0.3, 118))
    tr = compute_trace(ch)
    fine = refine_trace(ch, tr, 1e-6, max_points=64)
    assert fine.points.size <= tr.points.size + 2 * 63 * (tr.points.size - 1)
