import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gexprisk.market import (BLOCK_PATHS, DegenerateVolatilityError, DensityError, MarketModel, StrategyProcess,
                             affine, brownian_increments, constant, gaussian_model, geometric_model,
                             girsanov_density, make_model, market_price_of_risk, ou_model, simulate_index,
                             terminal_wealth, theta_paths, wealth_paths)


def test_gaussian_terminal_law(gaussian_bundle):
    R_T = gaussian_bundle.R[:, -1]
    assert abs(R_T.mean()) <= 3.0 / math.sqrt(R_T.size)
    assert abs(R_T.var() - 1.0) <= 0.1


def test_ou_mean_reverts_to_exponential():
    # b = -r, sigma = 0.2: E[R_T] = e^{-1}; no antithetics so the SE is honest
    b = simulate_index(ou_model(1.0, 0.0, 0.2), 0.0, 1.0, 1.0, 500, 20_000, 7)
    m, se = b.mean_se(b.R[:, -1])
    assert abs(m - math.exp(-1.0)) <= 3 * se


def test_market_price_of_risk_substitution():
    m = gaussian_model(alpha=0.0, alpha_slope=0.05, beta=0.2)
    assert market_price_of_risk(m, 0.0, 2.0) == pytest.approx(0.5, abs=1e-15)


def test_drift_only_wealth():
    m = gaussian_model(0.0, 0.0, alpha=0.06, beta=0.2)
    b = simulate_index(m, 0.0, 0.0, 1.0, 50, 50_000, 3)
    X_T = terminal_wealth(b, StrategyProcess.constant(1.0, 2.0), m)
    mean, se = b.mean_se(X_T)
    assert abs(mean - 2.3) <= 3 * se


def test_wealth_starts_at_x(gaussian_bundle):
    m = gaussian_model(0.0, 1.0, alpha=0.3, beta=1.0)
    X = wealth_paths(gaussian_bundle, StrategyProcess.feedback(lambda s, r, x: 0.5 * r, 1.5), m)
    assert np.all(X[:, 0] == 1.5)
    assert X.shape == gaussian_bundle.R.shape


def test_girsanov_moments(pricing_model, pricing_bundle):
    A = girsanov_density(pricing_bundle, pricing_model)
    assert np.all(A[:, 0] == 1.0)
    m1, se1 = pricing_bundle.mean_se(A[:, -1])
    m2, se2 = pricing_bundle.mean_se(A[:, -1] ** 2)
    assert abs(m1 - 1.0) <= 3 * se1
    assert abs(m2 - math.exp(0.09)) <= 3 * se2


def test_density_overflow_is_reported():
    m = gaussian_model(0.0, 1.0, alpha=400.0, beta=1.0)
    b = simulate_index(m, 0.0, 0.0, 1.0, 10, 20, 1)
    with pytest.raises(DensityError):
        girsanov_density(b, m)


def test_degenerate_beta_rejected():
    m = gaussian_model(alpha=0.1, beta=0.0)
    with pytest.raises(DegenerateVolatilityError):
        m.theta(0.0, 0.0)


def test_same_seed_reproduces_paths():
    m = ou_model()
    a = simulate_index(m, 0.0, 0.1, 1.0, 20, 500, 11)
    b = simulate_index(m, 0.0, 0.1, 1.0, 20, 500, 11)
    c = simulate_index(m, 0.0, 0.1, 1.0, 20, 500, 12)
    assert np.array_equal(a.R, b.R)
    assert not np.array_equal(a.R, c.R)


def test_block_streams_are_prefix_stable():
    ds = np.full(5, 0.2)
    small = brownian_increments(99, BLOCK_PATHS + 10, 5, ds)
    large = brownian_increments(99, 2 * BLOCK_PATHS, 5, ds)
    assert np.array_equal(small[:BLOCK_PATHS], large[:BLOCK_PATHS])
    threaded = brownian_increments(99, 2 * BLOCK_PATHS, 5, ds, n_jobs=2)
    assert np.array_equal(large, threaded)


def test_antithetic_halves_are_negated():
    dW = brownian_increments(5, 100, 8, np.full(8, 0.125), antithetic=True)
    assert np.array_equal(dW[50:], -dW[:50])


def test_bundle_arrays_are_read_only(gaussian_bundle):
    with pytest.raises(ValueError):
        gaussian_bundle.R[0, 0] = 1.0


def test_generic_model_matches_affine_kernel():
    aff = geometric_model(0.05, 0.2)
    generic = MarketModel(b=lambda s, r: 0.05 * r, sigma=lambda s, r: 0.2 * r, alpha=constant(0.06), beta=constant(0.2))
    a = simulate_index(aff, 0.0, 1.0, 1.0, 30, 200, 4)
    g = simulate_index(generic, 0.0, 1.0, 1.0, 30, 200, 4)
    np.testing.assert_allclose(a.R, g.R, rtol=1e-13, atol=0)


def test_theta_paths_shape_and_value(gaussian_bundle):
    m = gaussian_model(alpha=0.06, beta=0.2)
    th = theta_paths(gaussian_bundle, m)
    assert np.allclose(th, 0.3)


def test_unknown_preset():
    with pytest.raises(ValueError):
        make_model("nope")


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(0.05, 3), st.floats(-5, 5), st.floats(-0.5, 0.5))
def test_theta_is_alpha_over_beta(alpha, beta, r, slope):
    m = gaussian_model(alpha=alpha, beta=beta, alpha_slope=slope)
    assert m.theta(0.3, r) == pytest.approx((alpha + slope * r) / beta, rel=1e-12, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 1), st.floats(0.1, 2))
def test_affine_derivative_defaults(c0, c1):
    f = affine(c0, c1)
    assert f(0.0, 3.0) == pytest.approx(c0 + 3.0 * c1)
