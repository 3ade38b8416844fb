import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from gradspin.numerics import (
    QuadratureError,
    RngStream,
    beta_binomial_pmf,
    digamma,
    gamma_ratio,
    geometric_pmf,
    integrate_01,
    log_gamma,
    mix64,
    negative_binomial_pmf,
    sample_beta,
    sample_gamma,
    sample_geometric_mean,
    sample_negative_binomial,
    trigamma,
)
from gradspin.models import redistribution_weight

EULER = 0.5772156649015329


def within_se(samples, expected, k=4.0):
    x = np.asarray(samples, dtype=float)
    se = x.std(ddof=1) / math.sqrt(x.size)
    return abs(x.mean() - expected) <= k * se


def test_log_gamma_values():
    assert log_gamma(1.0) == pytest.approx(0.0, abs=1e-15)
    assert log_gamma(4.0) == pytest.approx(math.log(6.0), rel=1e-13)
    assert log_gamma(0.5) == pytest.approx(0.5723649429247001, rel=1e-13)


def test_log_gamma_recurrence_on_log_grid():
    x = np.logspace(-3, 5, 400)
    lhs = log_gamma(x + 1.0)
    rhs = log_gamma(x) + np.log(x)
    assert np.all(np.abs(lhs - rhs) <= 1e-12 * np.maximum(1.0, np.abs(lhs)))


def test_digamma_values_and_recurrence():
    assert digamma(1.0) == pytest.approx(-EULER, abs=1e-12)
    assert digamma(2.0) == pytest.approx(1.0 - EULER, abs=1e-12)
    assert digamma(3.7) > digamma(2.2)
    x = np.logspace(-3, 5, 400)
    assert np.max(np.abs(digamma(x + 1.0) - digamma(x) - 1.0 / x)) <= 1e-10


def test_trigamma_values():
    assert trigamma(1.0) == pytest.approx(math.pi**2 / 6, abs=1e-12)
    assert trigamma(2.0) == pytest.approx(math.pi**2 / 6 - 1.0, abs=1e-12)
    assert trigamma(5.0) < trigamma(2.0)
    assert trigamma(7.5) > 0


@pytest.mark.parametrize("fn", [log_gamma, digamma, trigamma])
def test_special_functions_reject_nonpositive(fn):
    with pytest.raises(ValueError):
        fn(0.0)
    with pytest.raises(ValueError):
        fn(-1.5)


def test_gamma_ratio_avoids_overflow():
    # Gamma(1001) / Gamma(1000) = 1000
    assert gamma_ratio([1001.0], [1000.0]) == pytest.approx(1000.0, rel=1e-11)
    assert gamma_ratio([3.0, 4.0], [2.0]) == pytest.approx(12.0, rel=1e-13)


def test_rng_stream_reproducible_and_distinct():
    a = RngStream(11, 3).generator.random(5)
    b = RngStream(11, 3).generator.random(5)
    c = RngStream(11, 4).generator.random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert mix64(11, 3) != mix64(11, 4)
    assert 0 <= mix64(2**63, 2**63) < 2**64


def test_rng_streams_look_independent():
    x = RngStream(5, 0).generator.random(200_000)
    y = RngStream(5, 1).generator.random(200_000)
    r = np.corrcoef(x, y)[0, 1]
    assert abs(r) < 4.0 / math.sqrt(x.size)


def test_sample_beta_moments():
    rng = RngStream(1, 0)
    x = sample_beta(2.0, 2.0, rng, size=1_000_000)
    assert within_se(x, 0.5)
    dev2 = (x - 0.5) ** 2
    assert within_se(dev2, 1.0 / 20.0)
    u = sample_beta(1.0, 1.0, rng, size=100_000)
    assert stats.kstest(u, "uniform").pvalue > 0.01
    with pytest.raises(ValueError):
        sample_beta(0.0, 1.0, rng)


def test_sample_gamma_moments():
    rng = RngStream(2, 0)
    assert within_se(sample_gamma(0.5, 2.0, rng, size=1_000_000), 1.0)
    e = sample_gamma(1.0, 3.0, rng, size=200_000)
    assert stats.kstest(e, "expon", args=(0, 3.0)).pvalue > 0.01
    s, rho = 0.75, 1.3
    x = sample_gamma(2 * s, rho, rng, size=1_000_000)
    for m in (1, 2, 3):
        expected = rho**m * math.exp(log_gamma(2 * s + m) - log_gamma(2 * s))
        assert within_se(x**m, expected)
    with pytest.raises(ValueError):
        sample_gamma(1.0, -1.0, rng)


def test_geometric_and_negative_binomial():
    assert geometric_pmf(0, 1.0) == pytest.approx(0.5)
    assert geometric_pmf(1, 1.0) == pytest.approx(0.25)
    k = np.arange(30)
    assert np.allclose(negative_binomial_pmf(k, 1.0, 0.8), geometric_pmf(k, 0.8), rtol=1e-12)
    rng = RngStream(3, 0)
    g = sample_geometric_mean(1.0, rng, size=1_000_000)
    assert within_se(g == 0, 0.5)
    assert within_se(g, 1.0)
    nb = sample_negative_binomial(2.0, 0.5, rng, size=1_000_000)
    assert within_se(nb, 1.0)
    with pytest.raises(ValueError):
        sample_geometric_mean(0.0, rng)
    with pytest.raises(ValueError):
        sample_negative_binomial(-1.0, 1.0, rng)


def test_beta_binomial_pmf_values():
    assert beta_binomial_pmf(1, 0, 1.0, 1.0) == pytest.approx(0.5)
    assert beta_binomial_pmf(1, 1, 1.0, 1.0) == pytest.approx(0.5)
    assert np.allclose(beta_binomial_pmf(2, np.arange(3), 1.0, 1.0), 1.0 / 3.0)
    with pytest.raises(ValueError):
        beta_binomial_pmf(3, 4, 1.0, 1.0)


@pytest.mark.parametrize("a0", [0.5, 1.0, 2.3, 7.0])
@pytest.mark.parametrize("b0", [0.5, 1.0, 2.3, 7.0])
def test_beta_binomial_normalization_and_mean(a0, b0):
    for n in (0, 1, 17, 200, 500):
        k = np.arange(n + 1)
        p = beta_binomial_pmf(n, k, a0, b0)
        assert abs(p.sum() - 1.0) <= 1e-12
        assert (k * p).sum() == pytest.approx(n * a0 / (a0 + b0), rel=1e-11, abs=1e-12)


@pytest.mark.parametrize("s", [0.25, 0.5, 1.0, 2.0])
def test_quadrature_beta_moments(s):
    assert integrate_01(lambda u: redistribution_weight(s, u)).value == pytest.approx(1.0, abs=1e-10)
    assert integrate_01(lambda u: redistribution_weight(s, u) * u).value == pytest.approx(0.5, abs=1e-10)


def test_quadrature_small_spin_and_i_half():
    assert integrate_01(lambda u: redistribution_weight(0.5, u) * u * (1 - u)).value == pytest.approx(1 / 6, abs=1e-12)
    # strong endpoint singularity: the upper half needs the reflected form
    w = lambda u: redistribution_weight(0.05, u)
    res = integrate_01(w, tol=1e-10, f_reflected=w)
    assert res.value == pytest.approx(1.0, abs=1e-10)
    assert res.abs_error_estimate >= 0


def test_quadrature_failure_is_reported():
    with pytest.raises(QuadratureError):
        integrate_01(lambda u: 1.0 / u**1.5, tol=1e-12, limit=20)


@given(st.floats(min_value=1e-3, max_value=1e4))
def test_log_gamma_matches_reflection_free_recurrence(x):
    assert log_gamma(x + 2.0) == pytest.approx(log_gamma(x) + math.log(x) + math.log(x + 1.0), rel=1e-12, abs=1e-12)
