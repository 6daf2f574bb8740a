import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from gptt_audit.noise import LaplaceDist, Rng, cdf, pdf, quantile, sample


def test_pdf_values():
    assert pdf(LaplaceDist(0, 1), 0) == 0.5
    assert pdf(LaplaceDist(0, 2), 0) == 0.25
    # closed form 0.5 * e^-1
    assert pdf(LaplaceDist(0, 1), 1) == pytest.approx(0.18393972058572117, rel=1e-14)


def test_cdf_values():
    d = LaplaceDist(0, 1)
    assert cdf(d, 0) == 0.5
    assert cdf(d, math.inf) == 1.0
    assert cdf(d, 1) == pytest.approx(0.8160602794142788, rel=1e-14)


def test_quantile_values():
    d = LaplaceDist(0, 1)
    assert quantile(d, 0.5) == 0
    assert quantile(d, 0.25) == pytest.approx(-0.6931471805599453, rel=1e-14)
    for x in (-3.0, 0.0, 2.0):
        assert quantile(d, cdf(d, x)) == pytest.approx(x, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
def test_quantile_domain(p):
    with pytest.raises(ValueError):
        quantile(LaplaceDist(0, 1), p)


def test_scale_must_be_positive():
    with pytest.raises(ValueError):
        LaplaceDist(0, 0)


def test_pdf_integrates_to_one():
    d = LaplaceDist(1.5, 0.7)
    lo, hi = d.loc - 40 * d.scale, d.loc + 40 * d.scale
    total = sum(
        integrate.quad(d.pdf, a, b, epsabs=1e-14, epsrel=1e-13)[0]
        for a, b in [(lo, d.loc), (d.loc, hi)]
    )
    assert total == pytest.approx(1.0, abs=1e-9)


def test_cdf_monotone_and_inverse():
    d = LaplaceDist(-2, 3)
    xs = np.linspace(-50, 50, 10001)
    assert np.all(np.diff(d.cdf(xs)) >= 0)
    ps = np.round(np.arange(0.01, 1.0, 0.01), 2)
    np.testing.assert_allclose(d.cdf(d.quantile(ps)), ps, atol=1e-10)


def test_log_functions_match():
    d = LaplaceDist(0.3, 1.7)
    xs = np.linspace(-20, 20, 401)
    np.testing.assert_allclose(d.logcdf(xs), np.log(d.cdf(xs)), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(d.logsf(xs), np.log1p(-d.cdf(xs)), rtol=1e-9)
    np.testing.assert_allclose(d.logpdf(xs), np.log(d.pdf(xs)), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(d.sf(xs), 1 - d.cdf(xs), atol=1e-15)


@given(
    st.floats(-10, 10),
    st.floats(0.1, 5),
    st.floats(-30, 30),
    st.floats(0, 1),
)
def test_pointwise_dp_ratio(mu, scale, x, frac):
    shift = frac * 1.0
    a, b = LaplaceDist(mu, scale), LaplaceDist(mu + shift, scale)
    assert a.logpdf(x) - b.logpdf(x) <= 1.0 / scale + 1e-12


def test_determinism():
    a = sample(LaplaceDist(0, 1), Rng(42), 100)
    b = sample(LaplaceDist(0, 1), Rng(42), 100)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sample(LaplaceDist(0, 1), Rng(43), 100))


def test_scalar_draws_follow_vector_stream():
    r1, r2 = Rng(5), Rng(5)
    d = LaplaceDist(0, 1)
    seq = [d.sample(r1) for _ in range(10)]
    np.testing.assert_array_equal(seq, d.sample(r2, 10))


def test_spawned_streams_are_independent_of_siblings():
    parent = Rng(9)
    c1, c2 = parent.spawn(2)
    first = c2.uniform(5)
    parent2 = Rng(9)
    d1, d2 = parent2.spawn(2)
    d1.uniform(1000)
    np.testing.assert_array_equal(first, d2.uniform(5))


def test_uniform_open_interval():
    u = Rng(0).uniform(10**6)
    assert u.min() > 0 and u.max() < 1


def test_seed_range():
    with pytest.raises(ValueError):
        Rng(-1)
    with pytest.raises(ValueError):
        Rng(2**64)
    Rng(2**64 - 1)


def test_sample_mean():
    x = LaplaceDist(5, 1).sample(Rng(1), 10**6)
    assert abs(x.mean() - 5) < 0.01


def test_sample_variance():
    x = LaplaceDist(0, 2).sample(Rng(2), 10**6)
    assert x.var() == pytest.approx(8.0, rel=0.05)


def test_kolmogorov_smirnov():
    d = LaplaceDist(0.5, 1.3)
    x = d.sample(Rng(3), 10**5)
    res = stats.kstest(x, d.cdf)
    assert res.statistic <= 0.01
