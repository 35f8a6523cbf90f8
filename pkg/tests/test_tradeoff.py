from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import mse_dense, mse_scalar
from ridgedebias.errors import DataError, ModelError
from ridgedebias.tradeoff import mse_curve, crossover_k_values, regime_classify
from ridgedebias.spectral import decompose_arrays


def scalar_cache(d2):
    # one column with squared norm d2; u1 = (1) so delta = beta
    return decompose_arrays(np.array([[math.sqrt(d2)], [0.0]]), np.zeros(2))


def test_scalar_totals():
    c = scalar_cache(25.0)
    curve = mse_curve(c, np.array([math.sqrt(1.2)]), 25.0, 1.0, k_max=50)
    assert curve.total[3] == pytest.approx(0.03984375, abs=1e-6)
    assert curve.total[4] == pytest.approx(0.0387109375, abs=1e-6)
    assert curve.total[5] == pytest.approx(0.039053, abs=1e-6)
    assert curve.argmin_k == 4
    brute = [mse_scalar(25.0, 25.0, 1.2, 1.0, k) for k in range(51)]
    np.testing.assert_allclose(curve.total[:51], brute, rtol=1e-12)


def test_zero_signal():
    x = np.random.default_rng(0).standard_normal((10, 3))
    curve = mse_curve(decompose_arrays(x, np.zeros(10)), np.zeros(3), 2.0, 1.0)
    assert np.all(curve.bias_sq == 0)
    np.testing.assert_array_equal(curve.total, curve.variance)
    assert curve.argmin_k == 0
    assert curve.regime == "increasing"


def test_large_k_limits():
    g = np.random.default_rng(1)
    x = g.standard_normal((30, 5))
    c = decompose_arrays(x, np.zeros(30))
    beta = g.uniform(-2, 2, 5)
    curve = mse_curve(c, beta, 3.0, 1.3, k_max=500, extend=False)
    assert curve.bias_sq[500] < 1e-8
    assert curve.variance[500] == pytest.approx(1.3**2 * np.sum(1 / c.d1**2), abs=1e-8)


@pytest.mark.parametrize("k", [0, 1, 3, 10, 40])
def test_matches_dense_mse(k):
    g = np.random.default_rng(2)
    x = g.standard_normal((25, 6))
    beta = g.uniform(-2, 2, 6)
    curve = mse_curve(decompose_arrays(x, np.zeros(25)), beta, 5.0, 0.7, k_max=50)
    assert curve.total[k] == pytest.approx(mse_dense(x, beta, 5.0, 0.7, k), rel=1e-10)


def test_rank_deficient_offset():
    g = np.random.default_rng(3)
    x = g.standard_normal((6, 10))
    beta = g.uniform(-2, 2, 10)
    curve = mse_curve(decompose_arrays(x, np.zeros(6)), beta, 1.0, 0.5, k_max=20)
    for k in (0, 5, 20):
        assert curve.total[k] == pytest.approx(mse_dense(x, beta, 1.0, 0.5, k), rel=1e-8)


def test_validation():
    c = scalar_cache(25.0)
    with pytest.raises(ModelError):
        mse_curve(c, np.ones(1), 25.0, 1.0, k_max=0)
    with pytest.raises(DataError):
        mse_curve(c, np.ones(2), 25.0, 1.0)


def test_csv_layout():
    text = mse_curve(scalar_cache(25.0), np.array([1.0]), 25.0, 1.0, k_max=5, extend=False).to_csv()
    lines = text.strip().splitlines()
    assert lines[0] == "k,bias_sq,variance,total"
    assert len(lines) == 7


# --- regimes --------------------------------------------------------------------


def test_high_signal_decreasing():
    # ratio delta^2 d^2 / sigma^2 = 100, slow decay r = 0.99
    rep = regime_classify(scalar_cache(1.0), np.array([10.0]), 99.0, 1.0, k_max=200)
    assert rep.ratios[0] == pytest.approx(100.0)
    assert rep.all_ratios_above_one
    assert rep.regime == "decreasing"
    assert np.all(np.diff(rep.curve.total[:201]) < 0)


def test_weak_signal_diagnostic_only():
    # ratio 0.9 with r = 0.5
    beta = np.array([math.sqrt(0.9 / 25.0)])
    rep = regime_classify(scalar_cache(25.0), beta, 25.0, 1.0)
    assert rep.crossover_k[0] == pytest.approx(math.log(0.1) / math.log(0.5) - 1, rel=1e-12)
    assert rep.crossover_k[0] == pytest.approx(2.32, abs=5e-3)
    brute = np.array([mse_scalar(25.0, 25.0, 0.036, 1.0, k) for k in range(201)])
    expected = "increasing" if np.all(np.diff(brute) >= 0) else "interior-minimum"
    assert rep.regime == expected
    assert rep.argmin_k == int(np.argmin(brute))


def test_zero_signal_increasing():
    rep = regime_classify(scalar_cache(4.0), np.zeros(1), 1.0, 1.0)
    assert rep.regime == "increasing"


def test_interior_minimum_scalar():
    rep = regime_classify(scalar_cache(25.0), np.array([math.sqrt(1.2)]), 25.0, 1.0)
    assert rep.regime == "interior-minimum"
    assert rep.argmin_k == 4


def test_crossover_k_nan_for_strong_directions():
    v = crossover_k_values(scalar_cache(1.0), np.array([10.0]), 99.0, 1.0)
    assert np.isnan(v[0])


def random_problem(seed):
    g = np.random.default_rng(seed)
    n, p = int(g.integers(10, 40)), int(g.integers(1, 8))
    x = g.standard_normal((n, p)) * g.uniform(0.1, 3.0, p)
    beta = g.uniform(-2, 2, p) * g.choice([0.01, 0.1, 1.0])
    lam = float(g.uniform(0.05, 1.5) * n)
    sigma = float(g.uniform(0.1, 3.0))
    return decompose_arrays(x, np.zeros(n)), beta, lam, sigma


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 1_000_000))
def test_improvement_over_ridge(seed):
    c, beta, lam, sigma = random_problem(seed)
    curve = mse_curve(c, beta, lam, sigma)
    if curve.regime in ("interior-minimum", "decreasing"):
        assert curve.total[curve.argmin_k] < curve.total[0]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1_000_000))
def test_curve_invariants(seed):
    c, beta, lam, sigma = random_problem(seed)
    curve = mse_curve(c, beta, lam, sigma, k_max=60, extend=False)
    np.testing.assert_array_equal(curve.total, curve.bias_sq + curve.variance)
    assert np.all(np.diff(curve.bias_sq) <= 1e-15 * max(curve.bias_sq[0], 1e-300))
    assert np.all(np.diff(curve.variance) >= 0)
    assert curve.total[curve.argmin_k] == curve.total.min()
    assert curve.argmin_k == int(np.flatnonzero(curve.total == curve.total.min())[0])


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.01, 10.0), st.floats(0.1, 10.0))
def test_per_direction_monotone(r, delta2, d2):
    lam = r * d2 / (1 - r)
    beta = np.array([math.sqrt(delta2)])
    curve = mse_curve(scalar_cache(d2), beta, lam, 1.0, k_max=60, extend=False)
    # stay where r^(k+1) is resolvable next to 1 in double precision
    keep = int(np.searchsorted(-(r ** (curve.ks + 1)), -1e-6))
    assert np.all(np.diff(curve.bias_sq[:keep]) < 0)
    assert np.all(np.diff(curve.variance[:keep]) > 0)


def test_extension_at_turning_point():
    # the minimum at k=4 sits next to the edge of a 0..5 grid: one doubling, then stop
    curve = mse_curve(scalar_cache(25.0), np.array([math.sqrt(1.2)]), 25.0, 1.0, k_max=5)
    assert curve.ks[-1] == 10
    assert curve.argmin_k == 4
    assert mse_curve(scalar_cache(25.0), np.array([math.sqrt(1.2)]), 25.0, 1.0, k_max=5, extend=False).ks[-1] == 5
