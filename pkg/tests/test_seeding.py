import numpy as np
import pytest
from scipy import stats

from slezip import seed_for


def test_deterministic():
    assert seed_for(7, 3) == seed_for(7, 3)
    assert 0 <= seed_for(2 ** 70, 0) < 2 ** 64


def test_no_cross_stream_collisions():
    base = np.random.default_rng(0).integers(0, 2 ** 62, 1_000_000)
    a = {seed_for(int(s), 0) for s in base}
    b = {seed_for(int(s), 1) for s in base}
    assert len(a) == len(set(base.tolist())) and not (a & b)


def test_equidistributed():
    top = np.array([seed_for(12345, k) >> 60 for k in range(1001)])
    counts = np.bincount(top, minlength=16)
    assert stats.chisquare(counts).pvalue > 0.01


def test_rejects_negative():
    with pytest.raises(ValueError):
        seed_for(-1, 0)
    with pytest.raises(ValueError):
        seed_for(0, -2)
