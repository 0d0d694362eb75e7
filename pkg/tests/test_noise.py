import math

import numpy as np
import pytest
from scipy import integrate

from kraichnan import parallel
from kraichnan.errors import DomainError, OutOfDomainError, ResolutionError
from kraichnan.kernels import CorrelationKernel, heat_kernel
from kraichnan.noise import (MollifierShape, MollifierSpec, NoiseRealization, SpaceTimeGrid,
                             mollified_field, mollified_value, sample_noise, walsh_variance_test)

CONST = CorrelationKernel.constant(1.5)
BELL = CorrelationKernel.gaussian_bell(1.0, 0.5)


def small_grid():
    return SpaceTimeGrid.uniform(-1.0, 1.0, 9, 1.0, 4)


def test_grid_validation():
    with pytest.raises(DomainError):
        SpaceTimeGrid(np.array([0.0]), np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        SpaceTimeGrid(np.array([0.0, 1.0, 3.0]), np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        SpaceTimeGrid(np.array([0.0, 1.0]), np.array([0.5, 1.0]))
    g = small_grid()
    assert (g.n, g.m) == (9, 4)
    assert g.dx == pytest.approx(0.25) and g.dt == pytest.approx(0.25)


def test_constant_kernel_rows_are_replicated():
    g = small_grid()
    nz = sample_noise(CONST, g, 3)
    inc = nz.increments
    assert np.allclose(inc, inc[:, :1], rtol=0, atol=1e-12 * math.sqrt(CONST.rho0 * g.dt))
    assert np.all(nz.W[0] == 0)
    assert np.allclose(nz.W[-1], inc.sum(axis=0))


def test_variance_and_correlation_over_seeds():
    g = SpaceTimeGrid.uniform(-1.0, 1.0, 5, 1.0, 2)
    n = 10000
    w_t = np.empty((n, g.n))
    inc0 = np.empty((n, g.n))
    for s in range(n):
        nz = sample_noise(BELL, g, s)
        w_t[s] = nz.W[-1]
        inc0[s] = nz.increments[0]
    var = w_t[:, 2].var(ddof=1)
    se = math.sqrt(2 / (n - 1)) * g.T * BELL.rho0
    assert abs(var - g.T * BELL.rho0) < 3 * se
    # correlation between x = 0 and x = 0.5
    r = np.corrcoef(inc0[:, 2], inc0[:, 3])[0, 1]
    target = BELL(0.5) / BELL.rho0
    assert abs(r - target) < 3 * (1 - target**2) / math.sqrt(n)
    # white in time: distinct rows are uncorrelated
    inc1 = np.array([sample_noise(BELL, g, s).increments[1, 2] for s in range(2000)])
    r01 = np.corrcoef(inc0[:2000, 2], inc1)[0, 1]
    assert abs(r01) < 4 / math.sqrt(2000)


def test_determinism_across_threads():
    g = SpaceTimeGrid.uniform(-2.0, 2.0, 33, 1.0, 700)
    a = sample_noise(BELL, g, 99)
    parallel.set_threads(4)
    b = sample_noise(BELL, g, 99)
    assert np.array_equal(a.increments, b.increments)
    assert not np.array_equal(a.increments, sample_noise(BELL, g, 100).increments)


def test_circulant_and_dense_agree_in_law():
    g = SpaceTimeGrid.uniform(-4.0, 4.0, 64, 1.0, 400)
    for method in ("dense", "circulant"):
        inc = sample_noise(BELL, g, 5, method=method).increments / math.sqrt(g.dt)
        c = np.cov(inc[:, 30], inc[:, 32])
        assert c[0, 0] == pytest.approx(BELL.rho0, abs=4 * math.sqrt(2 / 400))
        assert c[0, 1] == pytest.approx(float(BELL(2 * g.dx)), abs=0.25)


def test_cache_roundtrip(tmp_path):
    g = small_grid()
    nz = sample_noise(BELL, g, 11)
    nz.save(tmp_path / "n.bin")
    back = NoiseRealization.load(tmp_path / "n.bin", BELL)
    assert np.array_equal(back.increments, nz.increments)
    assert back.seed == 11
    with pytest.raises(DomainError):
        NoiseRealization.load(tmp_path / "n.bin", CONST)
    nz.write_snapshots_csv(tmp_path / "w.csv", [0.0, 1.0])
    assert len((tmp_path / "w.csv").read_text().splitlines()) == 1 + 2 * g.n


def test_w_at_interpolates():
    g = small_grid()
    nz = sample_noise(BELL, g, 2)
    assert nz.W_at(0.5, g.x_points[3]) == pytest.approx(nz.W[2, 3])
    mid = nz.W_at(0.125, g.x_points[3])
    assert mid == pytest.approx(0.5 * nz.W[1, 3])
    with pytest.raises(OutOfDomainError):
        nz.W_at(0.5, 3.0)


def test_bump_mollifier_is_normalized():
    spec = MollifierSpec(MollifierShape.BUMP, 0.3, 0.7)
    for which, w in (("t", 0.3), ("x", 0.7)):
        mass, _ = integrate.quad(lambda z: float(spec.density(which, z)), -w, w, epsabs=1e-10)
        assert mass == pytest.approx(1.0, abs=1e-6)
        assert spec.cdf(which, -w) == 0.0 and spec.cdf(which, w) == 1.0


def test_mollified_resolution_error():
    g = SpaceTimeGrid.uniform(-5, 5, 101, 1.0, 10)
    nz = NoiseRealization.zero(CONST, g)
    with pytest.raises(ResolutionError):
        mollified_value(nz, MollifierSpec("bump", 0.1, 1.0), 0.5, 0.0)
    assert mollified_value(nz, MollifierSpec("bump", 0.3, 1.0), 0.5, 0.0) == 0.0


def test_mollified_variance_constant_kernel():
    g = SpaceTimeGrid.uniform(-3, 3, 61, 2.0, 200)
    spec = MollifierSpec("heat", 0.02, 0.1, nu=0.5)
    vals = np.array([mollified_value(sample_noise(CONST, g, s), spec, 1.0, 0.0) for s in range(2000)])
    target = heat_kernel(0.5, 0.04, 0.0) * CONST.rho0
    se = target * math.sqrt(2 / 1999)
    assert abs(vals.var(ddof=1) - target) < 3 * se


def test_mollified_variance_gaussian_bell():
    g = SpaceTimeGrid.uniform(-4, 4, 81, 2.0, 200)
    spec = MollifierSpec("heat", 0.02, 0.05, nu=0.5)
    vals = np.array([mollified_value(sample_noise(BELL, g, s), spec, 1.0, 0.0) for s in range(2000)])
    # (p_{2 delta} * rho)(0) for a Gaussian bell is rho0 * l / sqrt(l^2 + 4 nu delta)
    ell = BELL.length_scale
    target = heat_kernel(0.5, 0.04, 0.0) * BELL.rho0 * ell / math.sqrt(ell**2 + 4 * 0.5 * 0.05)
    se = target * math.sqrt(2 / 1999)
    assert abs(vals.var(ddof=1) - target) < 3 * se


def test_mollified_field_matches_pointwise():
    g = SpaceTimeGrid.uniform(-3, 3, 61, 1.0, 100)
    nz = sample_noise(BELL, g, 4)
    spec = MollifierSpec("bump", 0.05, 0.3)
    field = mollified_field(nz, spec, [0.5])
    i = 30
    assert field[0, i] == pytest.approx(mollified_value(nz, spec, 0.5, g.x_points[i]), rel=1e-12)
    assert np.isnan(field[0, 0])


def test_walsh_examples():
    g = SpaceTimeGrid.uniform(-0.5, 1.5, 21, 1.0, 10)
    zero = walsh_variance_test(CONST, g, np.zeros((g.m, g.n)), 10)
    assert (zero.empirical, zero.analytic) == (0.0, 0.0)
    # indicator of [0, 1] with trapezoid-consistent end weights has unit x-mass
    ind = ((g.x_points >= 0) & (g.x_points <= 1)).astype(float)
    ind[np.isclose(g.x_points, 0)] = 0.5
    ind[np.isclose(g.x_points, 1)] = 0.5
    chk = walsh_variance_test(CONST, g, np.broadcast_to(ind, (g.m, g.n)), 2000, seed=1)
    assert chk.analytic == pytest.approx(CONST.rho0, rel=1e-12)
    assert abs(chk.empirical - chk.analytic) < 3 * chk.stderr


def test_walsh_gaussian_bump():
    g = SpaceTimeGrid.uniform(-3, 3, 25, 1.0, 8)
    chk = walsh_variance_test(BELL, g, lambda t, x: np.exp(-x**2) * (1 + t), 3000, seed=2)
    assert abs(chk.empirical - chk.analytic) < 3 * chk.stderr
