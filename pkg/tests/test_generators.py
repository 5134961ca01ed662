import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gexprisk.generators import (FAMILIES, GeneratorError, avar, case1, case2, case3, decaying_aversion,
                                 effective_generator, entropic, evaluate_g, g_of, huber_identity_check)
from gexprisk.market import gaussian_model

FACTORIES = {"case1_sqrt": case1, "case2_logistic": case2, "case3_huber": case3, "entropic_quadratic": entropic}
zs = st.floats(-50, 50, allow_nan=False)
levels = st.floats(0.05, 5.0)


def test_huber_branches():
    g = case3(2.0)
    assert evaluate_g(g, 0.0, 0.0, 0.0, 0.25) == pytest.approx(0.0625, abs=1e-15)
    assert evaluate_g(g, 0.0, 0.0, 0.0, 1.0) == pytest.approx(0.75, abs=1e-15)


def test_huber_unit_threshold():
    g = case3(1.0)
    assert 1.0 * evaluate_g(g, 0.0, 0.0, 0.0, 2.0) == pytest.approx(1.5, abs=1e-15)


def test_case1_effective_generator_at_optimum():
    m = gaussian_model(alpha=0.3, beta=1.0)
    assert effective_generator(case1(0.5), m, 0.0, 0.0, 0.0, 0.0, 0.75) == pytest.approx(-0.1, abs=1e-12)


def test_case2_vanishes_at_zero_and_is_stable():
    g = case2(0.7)
    assert evaluate_g(g, 0.0, 0.0, 0.0, 0.0) == 0.0
    far = evaluate_g(g, 0.0, 0.0, 0.0, np.array([-800.0, 800.0]))
    assert np.all(np.isfinite(far))
    assert far[0] == pytest.approx(0.7 * (800 - math.log(2.0)))
    assert far[1] == pytest.approx(-0.7 * math.log(2.0))


def test_avar_coefficient():
    assert avar(0.3).scale(0, 0, 0) == 1.0
    assert avar(0.8).scale(0, 0, 0) == pytest.approx(0.25)
    with pytest.raises(GeneratorError):
        avar(0.0)


def test_decaying_aversion_decreases_in_wealth():
    a = decaying_aversion(1.0, 0.5)
    vals = [a(0.0, 0.0, x) for x in (-1.0, 0.0, 1.0, 4.0)]
    assert vals[0] == vals[1] == 1.0
    assert vals[1] > vals[2] > vals[3]


def test_identity_check_rejects_other_families():
    with pytest.raises(GeneratorError):
        huber_identity_check(case1(0.5), [(0, 0, 0, 1.0)])


@settings(max_examples=200, deadline=None)
@given(levels, zs, st.floats(0, 3), st.floats(-2, 5))
def test_huber_matches_scipy_reference(gamma, z, decay, x):
    check = huber_identity_check(case3(gamma, decay), [(0.0, 0.0, x, z)])
    assert check, check.worst


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(FAMILIES), levels, zs, zs, st.floats(0, 1))
def test_convexity(family, level, z1, z2, w):
    spec = avar(min(level / 5.0, 1.0)) if family == "avar" else FACTORIES[family](level)
    g = lambda z: evaluate_g(spec, 0.0, 0.0, 0.0, z)
    mid = g(w * z1 + (1 - w) * z2)
    assert mid <= w * g(z1) + (1 - w) * g(z2) + 1e-9 * (1 + abs(g(z1)) + abs(g(z2)))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(["case1_sqrt", "case2_logistic", "case3_huber"]), levels, zs, zs)
def test_lipschitz_bound(family, level, z1, z2):
    spec = FACTORIES[family](level)
    L = spec.lipschitz_bound(0.0, 0.0, 0.0)
    diff = abs(evaluate_g(spec, 0, 0, 0, z1) - evaluate_g(spec, 0, 0, 0, z2))
    assert diff <= L * abs(z1 - z2) * (1 + 1e-12) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["case1_sqrt", "case3_huber", "entropic_quadratic"]), levels, levels, zs)
def test_monotone_in_aversion(family, a, b, z):
    lo, hi = sorted((a, b))
    assert g_of(family, lo, z) <= g_of(family, hi, z) + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["case1_sqrt", "case2_logistic", "case3_huber", "entropic_quadratic"]), levels, zs)
def test_vectorized_matches_scalar_kernel(family, level, z):
    from gexprisk import kernels
    from gexprisk.generators import FAMILY_CODES
    assert g_of(family, level, z) == pytest.approx(kernels.g_scalar(FAMILY_CODES[family], level, z), rel=1e-13, abs=1e-14)
