import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kraichnan import parallel
from kraichnan.errors import DomainError, InsufficientDataError
from kraichnan.fractal import (TimeSet, bm_cone_set, bm_level_set, brownian_integers, cone_width, count_boxes,
                               decay_dimension, dim_or_zero, estimate_dim, gamma_decay_logset,
                               gamma_exceedance_set, gamma_level_set, geometric_grid, ou_exceedance)


def test_count_boxes_examples():
    ts = TimeSet.from_points([1.5, 3.2], 10)
    assert count_boxes(ts, 5) == 2
    assert count_boxes(TimeSet(np.ones(11, bool)), 7) == 8
    assert count_boxes(TimeSet(np.zeros(11, bool)), 10) == 0
    with pytest.raises(DomainError):
        count_boxes(ts, 11)


@settings(max_examples=50)
@given(st.lists(st.booleans(), min_size=2, max_size=200), st.lists(st.booleans(), min_size=2, max_size=200))
def test_counts_monotone_in_m_and_inclusion(a, b):
    n = min(len(a), len(b))
    sa = TimeSet(np.array(a[:n]))
    sb = sa.union(TimeSet(np.array(b[:n])))
    ca, cb = sa.counts(), sb.counts()
    assert np.all(np.diff(ca) >= 0)
    assert np.all(cb >= ca)
    assert all(count_boxes(sa, m) == ca[m] for m in range(n))


def perfect_squares(horizon):
    return TimeSet.from_points(np.arange(int(math.isqrt(horizon)) + 1) ** 2, horizon)


def test_perfect_squares_calibration():
    ts = perfect_squares(10**6)
    m = geometric_grid(10**6)
    assert np.array_equal(ts.counts()[m], np.floor(np.sqrt(m)).astype(int) + 1)
    est = estimate_dim(ts)
    assert est.slope == pytest.approx(0.5, abs=0.05)
    assert est.in_band and est.window[0] == 100


def test_full_and_empty_sets():
    assert estimate_dim(TimeSet(np.ones(10**5 + 1, bool))).slope == pytest.approx(1.0, abs=0.01)
    with pytest.raises(InsufficientDataError):
        estimate_dim(TimeSet(np.zeros(10**5 + 1, bool)))
    with pytest.raises(InsufficientDataError):
        estimate_dim(TimeSet(np.ones(2001, bool)))
    assert dim_or_zero([TimeSet(np.zeros(10**5 + 1, bool))]) == 0.0


def test_level_set_basics():
    w = brownian_integers(10**4, 3)
    assert w.size == 10**4 + 2 and w[0] == 0.0
    ts = bm_level_set(0.0, 10**4, seed=3, values=w)
    assert ts.hit[0]
    far = bm_level_set(1e3 * math.sqrt(1e4), 10**4, seed=3, values=w)
    assert not far.hit.any()


def test_level_set_dimension():
    sets = [bm_level_set(0.0, 10**5, 4, seed=s) for s in range(16)]
    est = estimate_dim(sets)
    assert est.slope == pytest.approx(0.5, abs=0.15)


def test_cone_sets():
    w = brownian_integers(10**5, 4)
    wide = bm_cone_set(5.0, 1e3, 10**5, values=w)
    assert wide.hit[math.ceil((5.0 / 1e3) ** 2) + 1:].all()
    est = estimate_dim([bm_cone_set(0.0, 1.0, 10**5, seed=s) for s in range(16)])
    assert abs(est.slope - 1.0) < 3 * est.stderr
    thin = dim_or_zero([bm_cone_set(0.0, 1e-6, 10**5, seed=s) for s in range(8)])
    assert thin < 0.8
    with pytest.raises(DomainError):
        bm_cone_set(0.0, 0.0, 100)


def test_ou_exceedance_small_alpha():
    est = estimate_dim([ou_exceedance(0.01, 10**5, seed=s) for s in range(4)])
    assert est.slope > 0.9


def test_gamma_exceedance_dichotomy():
    nu = 0.25
    k_crit = 1 / (4 * math.pi * nu)
    assert cone_width(nu, 1.0, k_crit) is None
    assert cone_width(nu, 1.0, 0.5 * k_crit) == pytest.approx(math.sqrt(4 * nu * math.log(2)))
    empty = gamma_exceedance_set(nu, 1.0, k_crit, 10**5, seed=1)
    assert not empty.hit.any()
    full = estimate_dim([gamma_exceedance_set(nu, 1.0, 0.5 * k_crit, 10**5, seed=s) for s in range(16)])
    assert abs(full.slope - 1.0) < 3 * full.stderr


def test_gamma_level_set_is_union_of_level_sets():
    w = brownian_integers(10**4, 2)
    nu, rho0, x = 0.5, 2.0, 3.0
    g = gamma_level_set(nu, rho0, x, 10**4, seed=2, refinement_levels=4)
    z = x / math.sqrt(rho0)
    a = bm_level_set(z, 10**4, 4, seed=2, values=w)
    b = bm_level_set(-z, 10**4, 4, seed=2, values=w)
    assert np.array_equal(g.hit, a.hit | b.hit)


def test_decay_sets():
    assert decay_dimension(1.0, 4.0, 1.0) == 0.5
    assert decay_dimension(1.0, 1.0, 1.0) == 0.0
    low = [gamma_decay_logset(1.0, 1.0, 0.01, 10**5, seed=s) for s in range(4)]
    assert estimate_dim(low).slope > 0.9
    high = [gamma_decay_logset(1.0, 1.0, 1.0, 10**5, seed=s) for s in range(4)]
    assert dim_or_zero(high) < 0.1
    with pytest.raises(DomainError):
        gamma_decay_logset(1.0, 1.0, 0.0, 100)


def test_sets_independent_of_thread_count():
    a = bm_level_set(0.0, 3 * 10**5, 4, seed=9)
    b = ou_exceedance(1.0, 3 * 10**5, seed=9)
    parallel.set_threads(4)
    assert np.array_equal(a.hit, bm_level_set(0.0, 3 * 10**5, 4, seed=9).hit)
    assert np.array_equal(b.hit, ou_exceedance(1.0, 3 * 10**5, seed=9).hit)
