import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kraichnan import seeding
from kraichnan.errors import DomainError
from kraichnan.paths import (bridge_values, refine_midpoints, sample_bm, sample_bm_batch,
                             standard_paths, to_bridge, write_paths_csv)

TP = np.linspace(0.0, 1.0, 11)


def test_sample_bm_starts_at_zero_and_is_deterministic():
    p = sample_bm(2.0, TP, 7)
    assert p.values[0] == 0.0
    assert np.array_equal(p.values, sample_bm(2.0, TP, 7).values)
    with pytest.raises(DomainError):
        sample_bm(0.0, TP, 1)
    with pytest.raises(DomainError):
        sample_bm(1.0, [0.1, 0.2], 1)


def test_variance_and_covariance():
    nu1 = 0.5
    b = sample_bm_batch(2 * nu1, TP, 10000, 3)
    n = b.shape[0]
    var = b[:, -1].var(ddof=1)
    assert abs(var - 1.0) < 3 * math.sqrt(2 / (n - 1))
    cov = np.cov(b[:, 3], b[:, 8])[0, 1]
    # Var of the product estimator for jointly Gaussian pairs
    se = math.sqrt((0.3 * 0.8 + 0.3**2) / n)
    assert abs(cov - 0.3) < 3 * se


def test_bridge_pins_and_covariance():
    b = sample_bm_batch(1.0, TP, 10000, 4)
    br = bridge_values(b, TP, 1.0, 0.0)
    assert np.all(br[:, 0] == 0.0) and np.all(br[:, -1] == 0.0)
    s, s2 = TP[3], TP[7]
    target = s * (1 - s2)
    cov = np.cov(br[:, 3], br[:, 7])[0, 1]
    se = math.sqrt((s * (1 - s) * s2 * (1 - s2) + target**2) / br.shape[0])
    assert abs(cov - target) < 3 * se
    # bridge independent of the endpoint of the motion it came from
    r = np.corrcoef(br[:, 5], b[:, -1])[0, 1]
    assert abs(r) < 4 / math.sqrt(br.shape[0])


def test_to_bridge_endpoint_exact():
    p = sample_bm(0.7, TP, 1)
    br = to_bridge(p, 1.0, -1.3)
    assert br.values[-1] == -1.3 and br.values[0] == 0.0
    with pytest.raises(DomainError):
        to_bridge(p, 0.5, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 100.0), st.integers(0, 2**32))
def test_speed_scaling_is_exact(c2, seed):
    unit = sample_bm_batch(1.0, TP, 3, seed)
    scaled = sample_bm_batch(c2, TP, 3, seed)
    assert np.allclose(scaled, math.sqrt(c2) * unit, rtol=1e-14, atol=0)


def test_refine_midpoints_law():
    gen = seeding.rng(0, "t")
    n = 20000
    mids = np.array([refine_midpoints([0.0, 0.0], 1.0, 1.0, 1, gen)[1] for _ in range(n)])
    assert abs(mids.var() - 0.25) < 3 * 0.25 * math.sqrt(2 / n)
    fine = refine_midpoints(standard_paths(seeding.rng(1), np.arange(5.0), 1)[0], 1.0, 1.0, 3, gen)
    assert fine.size == 4 * 8 + 1


def test_write_paths_csv(tmp_path):
    write_paths_csv(tmp_path / "p.csv", TP, sample_bm_batch(1.0, TP, 2, 0))
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "t,path0,path1" and len(lines) == TP.size + 1
