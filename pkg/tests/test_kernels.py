import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gexprisk import _kernels_py as py
from gexprisk import kernels

try:
    from gexprisk import _kernels as cy
except ImportError:  # pragma: no cover - exercised only without a compiler
    cy = None

needs_compiled = pytest.mark.skipif(cy is None, reason="compiled kernels not built")
codes = st.sampled_from([1, 2, 3, 4, 5])
params = st.floats(0.1, 3.0)
reals = st.floats(-50, 50)


def test_selected_implementation():
    expected = "cython" if cy is not None and os.environ.get("GEXPRISK_PURE_PYTHON", "") in ("", "0") else "python"
    assert kernels.IMPLEMENTATION == expected


def test_env_forces_fallback():
    code = "from gexprisk import kernels; print(kernels.IMPLEMENTATION)"
    env = {**os.environ, "GEXPRISK_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_compiled
@pytest.mark.parametrize("coeffs", [(0.0, 0.0, 1.0, 0.0), (0.5, -1.0, 0.2, 0.0), (0.05, 0.0, 0.0, 0.2)])
def test_euler_bit_identical(coeffs):
    rng = np.random.default_rng(0)
    dt = np.full(64, 1 / 64)
    dW = rng.standard_normal((300, 64)) * np.sqrt(dt)
    assert np.array_equal(py.euler_affine(0.7, dt, dW, *coeffs), cy.euler_affine(0.7, dt, dW, *coeffs))


@needs_compiled
@settings(max_examples=300, deadline=None)
@given(codes, params, reals)
def test_g_bit_identical(code, param, z):
    assert py.g_scalar(code, param, z) == cy.g_scalar(code, param, z)


@needs_compiled
@settings(max_examples=300, deadline=None)
@given(codes, params, st.floats(-2, 2), reals)
def test_reduced_objective_bit_identical(code, param, theta, u):
    assert py.reduced_objective(code, param, theta, u) == cy.reduced_objective(code, param, theta, u)


@needs_compiled
@settings(max_examples=300, deadline=None)
@given(codes, params, st.floats(-2, 2), reals, st.floats(1e-6, 40))
def test_slope_excess_bit_identical(code, param, theta, c, width):
    assert py.slope_excess(code, param, theta, c, c + width) == cy.slope_excess(code, param, theta, c, c + width)


@needs_compiled
@settings(max_examples=150, deadline=None)
@given(codes, params, st.floats(-0.9, 0.9), st.floats(-30, -1), st.floats(1, 30))
def test_golden_bit_identical(code, param, frac, lo, hi):
    theta = frac * param
    assert py.golden_min_gbar(code, param, theta, lo, hi, 1e-12, 400) == cy.golden_min_gbar(code, param, theta, lo, hi,
                                                                                              1e-12, 400)


@settings(max_examples=150, deadline=None)
@given(codes, params, st.floats(-2, 2), reals)
def test_reduced_objective_definition(code, param, theta, u):
    assert kernels.reduced_objective(code, param, theta, u) == pytest.approx(
        kernels.g_scalar(code, param, -u) - theta * u, rel=1e-14, abs=1e-14)


def test_golden_finds_entropic_minimum():
    # g = z^2 gamma/2; min of g(-u) - theta u is at u = theta/gamma
    u, fu, it = kernels.golden_min_gbar(kernels.ENTROPIC, 2.0, 0.6, -10.0, 10.0, 1e-12, 400)
    assert u == pytest.approx(0.3, abs=1e-9)
    assert fu == pytest.approx(-0.09, abs=1e-15)
    assert 0 < it < 400
