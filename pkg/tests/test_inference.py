from __future__ import annotations

import dataclasses
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from oracles import covariance_dense
from ridgedebias.errors import DataError, ModelError, NonEstimableContrast
from ridgedebias.inference import (
    CovarianceModel,
    confidence_interval,
    contrast_test,
    covariance_debiased,
    intervals_to_csv,
    prediction_interval,
    quadratic_form,
    z_quantile,
)
from ridgedebias.screening import screen, two_stage_fit
from ridgedebias.spectral import RidgeConfig, debias, decompose_arrays
from ridgedebias.tradeoff import variance_trace

SCALAR = decompose_arrays(np.array([[3.0], [4.0]]), np.array([6.0, 8.0]))
HOMO1 = CovarianceModel.homoskedastic(1.0)


def scalar_fit(k=1, sigma_hat=1.0):
    return dataclasses.replace(debias(SCALAR, RidgeConfig(25.0, k)), sigma_hat=sigma_hat)


def instance(seed, n=8, p=5):
    g = np.random.default_rng(seed)
    x = g.standard_normal((n, p))
    return x, g.standard_normal(n)


# --- covariance ----------------------------------------------------------------------


def test_scalar_covariance():
    np.testing.assert_allclose(covariance_debiased(SCALAR, 25.0, 1, HOMO1), [[0.0225]])


def test_covariance_k0_dense():
    x, y = instance(0)
    c = decompose_arrays(x, y)
    a_inv = np.linalg.inv(x.T @ x + 2.0 * np.eye(5))
    expected = 1.7**2 * a_inv @ x.T @ x @ a_inv
    got = covariance_debiased(c, 2.0, 0, CovarianceModel.homoskedastic(1.7))
    assert np.abs(got - expected).max() < 1e-10


@pytest.mark.parametrize("k", [1, 4, 17])
def test_covariance_diagonal_dense(k):
    x, y = instance(1, 12, 5)
    v = np.random.default_rng(2).uniform(0.5, 3.0, 12)
    got = covariance_debiased(decompose_arrays(x, y), 3.0, k, CovarianceModel.diagonal(v))
    assert np.abs(got - covariance_dense(x, 3.0, k, np.diag(v))).max() < 1e-10


def test_covariance_least_squares_limit():
    x, y = instance(3, 30, 5)
    got = covariance_debiased(decompose_arrays(x, y), 3.0, 500, HOMO1)
    expected = np.linalg.inv(x.T @ x)
    assert np.abs(got - expected).max() <= 1e-6 * np.abs(expected).max()


def test_diagonal_length_mismatch():
    x, y = instance(4)
    with pytest.raises(DataError):
        covariance_debiased(decompose_arrays(x, y), 1.0, 1, CovarianceModel.diagonal(np.ones(3)))


def test_covariance_model_validation():
    with pytest.raises(ModelError):
        CovarianceModel.homoskedastic(-1.0)
    with pytest.raises(ModelError):
        CovarianceModel.diagonal([1.0, 0.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 20), st.integers(1, 15), st.floats(0.01, 50), st.integers(0, 40))
def test_covariance_psd_symmetric(seed, n, p, lam, k):
    x, y = instance(seed, n, p)
    cov = covariance_debiased(decompose_arrays(x, y), lam, k, HOMO1)
    np.testing.assert_array_equal(cov, cov.T)
    tr = np.trace(cov)
    assert np.linalg.eigvalsh(cov).min() >= -1e-10 * tr / p


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.01, 50), st.integers(0, 40), st.floats(0.1, 5))
def test_trace_identity(seed, lam, k, sigma):
    x, y = instance(seed, 15, 6)
    c = decompose_arrays(x, y)
    tr = np.trace(covariance_debiased(c, lam, k, CovarianceModel.homoskedastic(sigma)))
    assert tr == pytest.approx(variance_trace(c, lam, sigma, k), rel=1e-10, abs=1e-14)


def test_quadratic_form_matches_matrix():
    x, y = instance(5, 12, 5)
    c = decompose_arrays(x, y)
    v = np.arange(1.0, 6.0)
    cov = covariance_debiased(c, 2.0, 3, HOMO1)
    assert quadratic_form(c, 2.0, 3, HOMO1, v) == pytest.approx(v @ cov @ v, rel=1e-12)


# --- contrast test ---------------------------------------------------------------------


def test_contrast_null_at_point():
    t = contrast_test(scalar_fit(), SCALAR, np.array([1.0]), 1.5, HOMO1)
    assert t.estimate == pytest.approx(1.5)
    assert t.se == pytest.approx(0.15)
    assert t.z == pytest.approx(0.0)
    assert t.p_value == pytest.approx(1.0)


def test_contrast_zero_vector():
    with pytest.raises(NonEstimableContrast):
        contrast_test(scalar_fit(), SCALAR, np.array([0.0]))


def test_contrast_outside_row_space():
    x = np.array([[1.0, 1.0], [2.0, 2.0], [0.5, 0.5]])
    c = decompose_arrays(x, np.array([1.0, 2.0, 0.0]))
    fit = debias(c, RidgeConfig(1.0, 2))
    with pytest.raises(NonEstimableContrast):
        contrast_test(fit, c, np.array([1.0, -1.0]))


def test_contrast_p_value():
    t = contrast_test(scalar_fit(), SCALAR, np.array([1.0]), 1.2, HOMO1)
    assert t.z == pytest.approx(2.0)
    assert t.p_value == pytest.approx(2 * norm.sf(2.0))


def test_fit_cache_mismatch():
    x, y = instance(6)
    c1, c2 = decompose_arrays(x, y), decompose_arrays(x, y + 1)
    with pytest.raises(DataError):
        contrast_test(debias(c1, RidgeConfig(1.0, 1)), c2, np.ones(5))


# --- intervals ------------------------------------------------------------------


def test_z_quantile():
    assert z_quantile(0.95) == pytest.approx(1.959963984540054, abs=1e-9)
    with pytest.raises(ModelError):
        z_quantile(1.0)


def test_scalar_confidence_interval():
    iv = confidence_interval(scalar_fit(), SCALAR, np.array([1.0]), 0.95)
    assert (iv.lower, iv.upper) == pytest.approx((1.2060, 1.7940), abs=5e-5)
    assert iv.kind == "confidence"


def test_scalar_prediction_interval():
    iv = prediction_interval(scalar_fit(), SCALAR, np.array([1.0]), 0.95)
    # 1.959964 * sqrt(0.0225 + 1) = 1.98189
    assert iv.upper - iv.point == pytest.approx(norm.ppf(0.975) * np.sqrt(1.0225), abs=1e-12)
    assert iv.upper - iv.point == pytest.approx(1.9819, abs=5e-5)


def test_interval_collapses_as_level_vanishes():
    iv = confidence_interval(scalar_fit(), SCALAR, np.array([1.0]), 1e-12)
    assert iv.upper - iv.lower < 1e-11


def test_zero_covariate_degenerate():
    iv = confidence_interval(scalar_fit(), SCALAR, np.array([0.0]), 0.95)
    assert (iv.lower, iv.upper, iv.se) == (0.0, 0.0, 0.0)
    assert iv.degenerate


def test_noise_free_prediction_equals_confidence():
    f = scalar_fit(sigma_hat=0.0)
    ci = confidence_interval(f, SCALAR, np.array([1.0]))
    pi = prediction_interval(f, SCALAR, np.array([1.0]))
    assert (ci.lower, ci.upper) == (pi.lower, pi.upper)


def test_sigma_hat_taken_from_fit():
    f = scalar_fit(sigma_hat=2.0)
    iv = confidence_interval(f, SCALAR, np.array([1.0]))
    assert iv.se == pytest.approx(0.3)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 0.999), st.integers(0, 30))
def test_interval_invariants(seed, level, k):
    x, y = instance(seed, 20, 4)
    c = decompose_arrays(x, y)
    fit = debias(c, RidgeConfig(2.0, k))
    x0 = np.random.default_rng(seed + 1).standard_normal(4)
    ci = confidence_interval(fit, c, x0, level)
    pi = prediction_interval(fit, c, x0, level)
    z = z_quantile(level)
    for iv in (ci, pi):
        assert iv.lower <= iv.point <= iv.upper
        assert iv.upper - iv.lower == pytest.approx(2 * z * iv.se)
    assert pi.se ** 2 == pytest.approx(ci.se**2 + fit.sigma_hat**2)
    if fit.sigma_hat > 0:
        assert pi.lower < ci.lower and ci.upper < pi.upper


def test_level_validation():
    with pytest.raises(ModelError):
        confidence_interval(scalar_fit(), SCALAR, np.array([1.0]), 0.0)


def test_two_stage_restricted_interval():
    g = np.random.default_rng(7)
    x = g.standard_normal((20, 40))
    y = x[:, :3] @ np.array([3.0, -3.0, 2.0]) + g.standard_normal(20)
    sel = screen(decompose_arrays(x, y), 2.0, 20, 6)
    fit = two_stage_fit(sel, 2.0, 10)
    x0 = g.standard_normal(40)
    pi = prediction_interval(fit, None, x0)
    xr = x0[sel.indices]
    var = quadratic_form(sel.restricted_cache, 2.0, 10, CovarianceModel.homoskedastic(fit.sigma_hat), xr)
    assert pi.point == pytest.approx(xr @ fit.beta_restricted)
    assert pi.se == pytest.approx(np.sqrt(var + fit.sigma_hat**2))
    with pytest.raises(DataError):
        prediction_interval(fit, None, xr)


def test_intervals_csv():
    f = scalar_fit()
    rows = [(0, confidence_interval(f, SCALAR, [1.0])), (0, prediction_interval(f, SCALAR, [1.0]))]
    text = intervals_to_csv(rows)
    lines = text.strip().splitlines()
    assert lines[0] == "x0_id,point,se,lower,upper,level,kind"
    assert lines[1].endswith("confidence") and lines[2].endswith("prediction")
    buf = io.StringIO()
    assert intervals_to_csv(rows, buf) is None and buf.getvalue() == text
