import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from kraichnan.errors import DomainError
from kraichnan.kernels import (CorrelationKernel, ModelParams, bdg_constant, eval_rho,
                               heat_kernel, kappa_of)

KERNELS = [
    CorrelationKernel.constant(2.0),
    CorrelationKernel.gaussian_bell(1.0, 1.0),
    CorrelationKernel.gaussian_bell(3.0, 0.4),
    CorrelationKernel.tabulated([0, 0.5, 1.0, 2.0], [1.0, 0.7, 0.2, 0.0]),
]


def test_eval_rho_examples():
    assert eval_rho(CorrelationKernel.constant(2.0), 5.0) == 2.0
    assert eval_rho(CorrelationKernel.gaussian_bell(1.0, 1.0), 0.0) == 1.0
    oracle = float(mpmath.exp(mpmath.mpf(-1) / 2))
    assert eval_rho(CorrelationKernel.gaussian_bell(1.0, 1.0), 1.0) == pytest.approx(oracle, rel=1e-15)
    assert oracle == pytest.approx(0.60653, abs=1e-5)


@pytest.mark.parametrize("kernel", KERNELS)
def test_kernel_invariants_on_lattice(kernel):
    ell = kernel.length_scale
    z = np.linspace(-10 * ell, 10 * ell, 1024)
    r = kernel(z)
    assert np.array_equal(r, kernel(-z))
    assert np.all(r >= 0)
    assert np.all(r <= kernel.rho0)
    assert kernel(0.0) == kernel.rho0
    if kernel.holder_const > 0:
        assert np.all(kernel.rho0 - r <= kernel.holder_const * np.abs(z) ** kernel.holder_exp + 1e-15)
    # continuity: neighbouring lattice values are close
    fine = np.linspace(-10 * ell, 10 * ell, 200001)
    assert np.max(np.abs(np.diff(kernel(fine)))) < 1e-2 * kernel.rho0


def test_gaussian_bell_holder_defaults():
    k = CorrelationKernel.gaussian_bell(2.0, 0.5)
    assert k.holder_exp == 2.0
    assert k.holder_const == pytest.approx(2.0 / (2 * 0.25))
    assert CorrelationKernel.constant(1.0).holder_const == 0.0


def test_tabulated_interpolation_and_clamp():
    k = CorrelationKernel.tabulated([0, 1, 2], [1.0, 0.5, 0.25])
    assert eval_rho(k, 0.5) == pytest.approx(0.75)
    assert eval_rho(k, -1.5) == pytest.approx(0.375)
    assert eval_rho(k, 50.0) == 0.25
    assert k.monotone_on_halfline and k.strictly_peaked


@pytest.mark.parametrize("z,rho", [([0, 1], [1.0, 1.5]), ([0.1, 1], [1.0, 0.5]), ([0, 1], [1.0, -0.1])])
def test_tabulated_rejects_invalid(z, rho):
    with pytest.raises(DomainError):
        CorrelationKernel.tabulated(z, rho)


def test_kernel_rejects_nonpositive_rho0():
    with pytest.raises(DomainError):
        CorrelationKernel.constant(0.0)


def test_heat_kernel_examples():
    assert heat_kernel(1, 1, 0) == pytest.approx(1 / math.sqrt(4 * math.pi), rel=1e-15)
    assert heat_kernel(1, 1, 0) == pytest.approx(0.28209, abs=1e-5)
    mass, _ = integrate.quad(lambda x: heat_kernel(0.7, 1.3, x), -60, 60, epsabs=1e-12, limit=200)
    assert mass == pytest.approx(1.0, abs=1e-8)
    for bad in [(0, 1, 0), (1, 0, 0), (-1, 1, 0), (1, -2, 0)]:
        with pytest.raises(DomainError):
            heat_kernel(*bad)


@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(-20, 20))
def test_heat_kernel_symmetric(nu, t, x):
    assert heat_kernel(nu, t, x) == heat_kernel(nu, t, -x)


def test_heat_kernel_semigroup():
    nu, s, t = 0.6, 0.4, 1.1
    for x in np.linspace(-5, 5, 11):
        conv, _ = integrate.quad(lambda z: heat_kernel(nu, s, x - z) * heat_kernel(nu, t, z),
                                 -40, 40, epsabs=1e-12, limit=400)
        assert conv == pytest.approx(heat_kernel(nu, s + t, x), abs=1e-6)


def test_kappa_examples():
    assert kappa_of(1, 1) == 0.5
    assert kappa_of(0.5, 1) == 0.0
    p = ModelParams.stratonovich(0.2, 1.0)
    assert p.nu2 == pytest.approx(0.7)
    assert p.kappa == pytest.approx(0.2)
    with pytest.raises(DomainError):
        kappa_of(1.0, 0.0)


def test_bdg_constant():
    assert bdg_constant(2) == 1
    assert bdg_constant(4) == 32
    assert bdg_constant(3) == 24
    with pytest.raises(DomainError):
        bdg_constant(1.5)


def test_model_params():
    p = ModelParams.isotropic(0.8, 1.0)
    assert p.nu == 0.8 and p.kappa == pytest.approx(0.3)
    with pytest.raises(AttributeError):
        ModelParams(1.0, 2.0, 1.0).nu
    with pytest.raises(DomainError):
        ModelParams(0.0, 1.0, 1.0)


def test_kernel_config_roundtrip_and_scaling():
    for k in KERNELS:
        assert CorrelationKernel.from_config(k.to_config()) == k
        s = k.scaled(2.0)
        assert s.rho0 == pytest.approx(2 * k.rho0)
        assert np.allclose(s(np.linspace(-3, 3, 31)), 2 * k(np.linspace(-3, 3, 31)))
