import math

import numpy as np
import pytest

from kraichnan.errors import DegenerateKernelError, DomainError, UnsupportedKernelError
from kraichnan.kernels import CorrelationKernel, heat_kernel
from kraichnan.noise import SpaceTimeGrid, sample_noise
from kraichnan.nu_limits import (bivariate_limit_density, characteristics_value, gamma_cov_direct,
                                 gamma_cov_limit, gamma_mean, gamma_mean_dichotomy, gamma_mean_limit,
                                 inviscid_distance, negative_moment_probe)
from kraichnan.solver_fk import InitialProfile

CONST = CorrelationKernel.constant(1.0)
BELL = CorrelationKernel.gaussian_bell(1.0, 1.0)
GRID = SpaceTimeGrid.uniform(-8, 8, 161, 1.0, 64)


def prof():
    return InitialProfile.function(lambda x, y: np.exp(-x**2 / 2) / (1 + y**2), 1.0)


def test_inviscid_distances_decrease():
    noises = [sample_noise(BELL, GRID, s) for s in range(6)]
    d = [inviscid_distance(prof(), BELL, nu, (1.0, 0.0), noises, 1000, 3).distance for nu in (1.0, 0.1, 0.01)]
    assert d[0] > d[1] > d[2]


def test_inviscid_constant_profile_and_errors():
    nz = sample_noise(BELL, GRID, 1)
    assert inviscid_distance(InitialProfile.constant(2.0), BELL, 0.5, (1.0, 0.0), nz, 100, 0).distance == 0.0
    with pytest.raises(DomainError):
        inviscid_distance(InitialProfile.dirac(), BELL, 0.5, (1.0, 0.0), nz, 10, 0)
    unbounded = InitialProfile.function(lambda x, y: y, math.inf)
    with pytest.raises(DomainError):
        inviscid_distance(unbounded, BELL, 0.5, (1.0, 0.0), nz, 10, 0)


def test_characteristics_constant_kernel_coupling():
    nz = sample_noise(CONST, GRID, 2)
    f = InitialProfile.function(lambda x, y: np.exp(-y**2) + 0 * x, 1.0)
    ys = np.linspace(-1, 1, 5)
    w = nz.W[-1, 0] / math.sqrt(CONST.rho0)
    assert np.allclose(characteristics_value(f, nz, 1.0, 0.3, ys), np.exp(-(ys - math.sqrt(CONST.rho0) * w) ** 2))


def test_gamma_mean_limit_table():
    rows = gamma_mean_limit(CONST, 1.0, 0.0, 0.0, [0.1, 0.01])
    assert rows[0]["limit"] == pytest.approx((2 * math.pi) ** -0.5, rel=1e-14)
    assert rows[0]["limit"] == pytest.approx(0.39894, abs=1e-5)
    assert rows[0]["analytic"] == heat_kernel(0.6, 1.0, 0.0)
    assert math.isnan(rows[0]["mc_estimate"])
    mc = gamma_mean_limit(BELL, 1.0, 0.3, -0.2, [1.0, 0.1, 0.01], n_bridges=20000, seed=2)
    for r in mc:
        assert abs(r["mc_estimate"] - r["analytic"]) < 3 * r["stderr"]
    with pytest.raises(DomainError):
        gamma_mean_limit(CONST, 0.0, 0.0, 0.0, [0.1])


def test_gamma_mean_identity_exact_everywhere():
    for nu, t, x, y in [(0.1, 1.0, 0.0, 0.0), (2.0, 0.5, 1.3, -0.4), (1e-3, 3.0, -0.2, 2.0)]:
        assert gamma_mean(nu, 1.5, t, x, y) / heat_kernel(nu, t, x) == pytest.approx(
            heat_kernel(nu + 0.75, t, y), rel=1e-14)


def test_dichotomy():
    nus = [1e-1, 1e-2, 1e-3, 1e-4]
    d = gamma_mean_dichotomy(CONST, 1.0, 0.0, nus)
    assert d.exponent == pytest.approx(-0.5, abs=0.05)
    ratio = gamma_mean(0.005, 1.0, 1.0, 0.0, 0.0) / gamma_mean(0.01, 1.0, 1.0, 0.0, 0.0)
    assert ratio == pytest.approx(math.sqrt(2) * heat_kernel(0.505, 1, 0) / heat_kernel(0.51, 1, 0), rel=1e-12)
    assert abs(ratio - math.sqrt(2)) < 1e-2
    # x = 1: the factor p_t(x) decreases once nu < x^2 / (2 t); the product with
    # p_t^(nu + rho0/2)(y) peaks a little lower, near nu = 0.35
    scan = np.geomspace(0.49, 1e-4, 40)
    px = heat_kernel(scan, 1.0, 1.0)
    assert np.all(np.diff(px[px > 0]) < 0)
    scan = np.geomspace(0.34, 1e-4, 40)
    vals = np.array([gamma_mean(nu, 1.0, 1.0, 1.0, 0.0) for nu in scan])
    assert np.all(np.diff(vals[vals > 0]) < 0)
    assert vals[-1] < 1e-4


def test_cov_limit_rejects_and_reduces():
    with pytest.raises(UnsupportedKernelError):
        gamma_cov_limit(CONST, 1.0, 0.0, 0.5, 0.0, 0.0, 1e-3, 10, 0)
    flat = CorrelationKernel.tabulated([0, 1, 2], [1.0, 1.0, 0.5])
    with pytest.raises(DomainError):
        gamma_cov_limit(flat, 1.0, 0.0, 0.0, 0.0, 0.0, 1e-3, 10, 0)
    k = np.array([0.0, 0.3, -0.2])
    assert np.allclose(bivariate_limit_density(k, 1.0, 2.0, 0.0, 0.0), 1 / (2 * math.pi * 2.0 * np.sqrt(1 - k**2)))
    assert bivariate_limit_density(0.0, 1.0, 1.0, 0.3, -0.2) == pytest.approx(
        heat_kernel(0.5, 1.0, 0.3) * heat_kernel(0.5, 1.0, -0.2), rel=1e-14)


def test_cov_limit_far_separation_is_nearly_independent():
    narrow = CorrelationKernel.gaussian_bell(1.0, 0.05)
    lim = gamma_cov_limit(narrow, 1.0, 0.0, 1.0, 0.3, -0.2, 1e-4, 2000, 1)
    product = heat_kernel(0.5, 1.0, 0.3) * heat_kernel(0.5, 1.0, -0.2)
    assert lim.estimate.value == pytest.approx(product, rel=0.02)
    assert lim.rejected == 0


def test_cov_limit_matches_direct_small_nu():
    lim = gamma_cov_limit(BELL, 1.0, 0.0, 0.5, 0.0, 0.0, 1e-3, 20000, 3)
    direct = gamma_cov_direct(BELL, 1.0, 0.0, 0.5, 0.0, 0.0, 1e-3, 20000, 4)
    se = math.hypot(lim.estimate.stderr, direct.stderr)
    assert abs(lim.estimate.value - direct.value) < 3 * se


def test_negative_moment_probe():
    with pytest.raises(DegenerateKernelError):
        negative_moment_probe(CONST, 1.0, 0.0, 0.5, 100, 0)
    # a soft diagnostic: typical doublings change the moment by well under 5%
    for x, xp in [(0.0, 0.5), (0.3, 0.3)]:
        reps = [negative_moment_probe(BELL, 1.0, x, xp, 10000, s) for s in range(5)]
        assert np.median([r.relative_change for r in reps]) < 0.05
        assert all(np.all(np.diff(r.tail_prob) >= 0) for r in reps)
        assert all(r.rejected == 0 for r in reps)
