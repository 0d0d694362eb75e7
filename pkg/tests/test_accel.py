import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from kraichnan import _accel
from kraichnan._accel import _fallback

core = pytest.importorskip("kraichnan._accel._core")

finite = st.floats(-5, 5, allow_nan=False)


@settings(max_examples=50, deadline=None)
@given(finite, st.floats(-0.99, 0.99), st.floats(0.0, 3.0), arrays(np.float64, st.integers(0, 50), elements=finite))
def test_ar1_backends_agree(x0, coef, scale, normals):
    a = core.ar1(x0, coef, scale, np.ascontiguousarray(normals))
    b = _fallback.ar1(x0, coef, scale, normals)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_ar1_recursion():
    out = _fallback.ar1(1.0, 0.5, 2.0, np.array([1.0, -1.0]))
    assert np.allclose(out, [1.0, 2.5, -0.75])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(0, 4), st.floats(-1, 1), st.integers(0, 2**31))
def test_bridge_crossings_backends_agree(n, levels, level, seed):
    gen = np.random.default_rng(seed)
    values = np.cumsum(np.concatenate([[0.0], gen.standard_normal(n)]))
    normals = np.ascontiguousarray(gen.standard_normal((n, 2**levels - 1)))
    a = np.asarray(core.bridge_crossings(values, level, 1.0, normals, levels), dtype=bool)
    b = _fallback.bridge_crossings(values, level, 1.0, normals, levels)
    assert np.array_equal(a, b)


def test_bridge_crossings_endpoint_sign_change():
    hit = _fallback.bridge_crossings(np.array([-1.0, 1.0, 2.0]), 0.0, 1.0, np.zeros((2, 0)), 0)
    assert hit.tolist() == [True, False]


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 20), st.integers(1, 15), st.integers(1, 6), st.integers(0, 2**31))
def test_curvilinear_sum_backends_agree(n, k, p, seed):
    gen = np.random.default_rng(seed)
    inc = np.ascontiguousarray(gen.standard_normal((k, n)))
    pos = np.ascontiguousarray(gen.uniform(0.0, (n - 1) * 0.5, (p, k)))
    a = core.curvilinear_sum(inc, 0.0, 0.5, pos)
    b = _fallback.curvilinear_sum(inc, 0.0, 0.5, pos)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


def test_backend_selected_at_import():
    assert _accel.BACKEND == "cython"
    code = "from kraichnan import _accel; print(_accel.BACKEND)"
    env = dict(os.environ, KRAICHNAN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
