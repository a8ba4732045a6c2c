import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from nbtri.distributions import (
    RngStream,
    log_pdf_dirichlet,
    log_pdf_gamma,
    log_pmf_geometric,
    log_pmf_negbin,
    log_pmf_poisson,
    sample_gamma,
    sample_poisson,
    sample_uniform,
)


def test_poisson_values():
    assert log_pmf_poisson(0, 1) == pytest.approx(-1.0)
    assert log_pmf_poisson(2, 3) == pytest.approx(math.log(4.5) - 3)
    assert log_pmf_poisson(2, 3) == pytest.approx(-1.49593, abs=1e-5)
    assert log_pmf_poisson(0, 0) == 0.0
    assert log_pmf_poisson(3, 0) == -np.inf


def test_poisson_large_count_no_overflow():
    assert np.isfinite(log_pmf_poisson(10_000, 9_000.0))


def test_poisson_negative_mean():
    with pytest.raises(ValueError):
        log_pmf_poisson(1, -0.1)


def test_negbin_values():
    assert log_pmf_negbin(0, 1, 1) == pytest.approx(math.log(0.5))
    x = np.arange(400)
    p = np.exp(log_pmf_negbin(x, 2, 0.3))
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    mean = (x * p).sum()
    assert mean == pytest.approx(0.6, abs=1e-10)
    assert ((x - mean) ** 2 * p).sum() == pytest.approx(0.78, abs=1e-10)


@pytest.mark.parametrize("r, pi", [(0, 0.5), (1, 0.0), (-2, 1.0)])
def test_negbin_invalid(r, pi):
    with pytest.raises(ValueError):
        log_pmf_negbin(1, r, pi)


def test_gamma_values():
    assert log_pdf_gamma(1, 1, 1) == pytest.approx(-1.0)
    # z=2, shape=3, rate=1: -log 2! + 2 log 2 - 2
    assert log_pdf_gamma(2, 3, 1) == pytest.approx(2 * math.log(2) - math.lgamma(3) - 2)
    assert log_pdf_gamma(2, 3, 1) == pytest.approx(math.log(2) - 2)
    m, _ = integrate.quad(lambda z: z * math.exp(log_pdf_gamma(z, 2, 4)), 0, np.inf)
    assert m == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize("z, a, b", [(0, 1, 1), (1, 0, 1), (1, 1, -1)])
def test_gamma_invalid(z, a, b):
    with pytest.raises(ValueError):
        log_pdf_gamma(z, a, b)


def test_geometric():
    assert log_pmf_geometric(2, 0.5) - log_pmf_geometric(1, 0.5) == pytest.approx(math.log(0.5))
    assert log_pmf_geometric(0, 0.5) == -np.inf
    k = np.arange(1, 5000)
    assert np.exp(log_pmf_geometric(k, 0.01)).sum() == pytest.approx(1.0, abs=1e-8)
    with pytest.raises(ValueError):
        log_pmf_geometric(1, 1.0)


def test_dirichlet():
    assert log_pdf_dirichlet([0.3, 0.7], [1, 1]) == pytest.approx(0.0)
    a = np.full(2, 0.5)
    # Dir(1/2, 1/2) on the 2-simplex is Beta(1/2, 1/2) = 1/(pi sqrt(p(1-p)))
    p = 0.2
    assert log_pdf_dirichlet([p, 1 - p], a) == pytest.approx(-math.log(math.pi * math.sqrt(p * (1 - p))))
    tot, _ = integrate.quad(lambda t: math.exp(log_pdf_dirichlet([t, 1 - t], [2.0, 3.0])), 0, 1)
    assert tot == pytest.approx(1.0, abs=1e-8)


def test_dirichlet_boundary_error():
    with pytest.raises(ValueError):
        log_pdf_dirichlet([0.0, 1.0], [0.5, 0.5])
    with pytest.raises(ValueError):
        log_pdf_dirichlet([0.5, 0.6], [1, 1])


@given(st.integers(0, 50), st.floats(0.01, 50))
def test_poisson_matches_direct(x, mu):
    direct = math.exp(-mu) * mu ** x / math.factorial(x)
    assert math.exp(log_pmf_poisson(x, mu)) == pytest.approx(direct, rel=1e-12, abs=1e-300)


@given(st.integers(0, 50), st.integers(1, 50), st.floats(0.01, 50))
def test_negbin_matches_direct(x, r, pi):
    direct = math.comb(x + r - 1, x) * (1 / (1 + pi)) ** r * (pi / (1 + pi)) ** x
    assert math.exp(log_pmf_negbin(x, r, pi)) == pytest.approx(direct, rel=1e-11, abs=1e-300)


@pytest.mark.parametrize("mu", [0.5, 3.0, 40.0])
def test_poisson_normalises(mu):
    x = np.arange(400)
    assert np.exp(log_pmf_poisson(x, mu)).sum() == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("shape, rate", [(1.0, 1.0), (3.5, 0.2), (20.0, 4.0)])
def test_gamma_normalises(shape, rate):
    tot, _ = integrate.quad(lambda z: math.exp(log_pdf_gamma(z, shape, rate)), 0, np.inf, limit=200)
    assert tot == pytest.approx(1.0, abs=1e-8)


def test_sample_gamma_mean():
    d = sample_gamma(RngStream(1), 1000, 2, size=100_000)
    se = math.sqrt(1000 / 4) / math.sqrt(len(d))
    assert abs(d.mean() - 500) < 3 * se


def test_sample_moments():
    n = 100_000
    s = RngStream(2)
    p = sample_poisson(s, 7.0, size=n)
    assert abs(p.mean() - 7) < 4 * math.sqrt(7 / n)
    # var of the sample variance of a Poisson: (mu + 2 mu^2 (n/(n-1))) / n, approximately
    assert abs(p.var(ddof=1) - 7) < 4 * math.sqrt((7 + 2 * 49) / n)
    g = sample_gamma(s, 3.0, 0.5, size=n)
    assert abs(g.mean() - 6) < 4 * math.sqrt(12 / n)
    u = sample_uniform(s, size=n)
    assert abs(u.mean() - 0.5) < 4 * math.sqrt(1 / 12 / n)


def test_poisson_zero_mean():
    assert np.all(sample_poisson(RngStream(3), 0.0, size=1000) == 0)


def test_sampler_errors():
    with pytest.raises(ValueError):
        sample_poisson(RngStream(0), -1)
    with pytest.raises(ValueError):
        sample_gamma(RngStream(0), 0, 1)


def test_stream_determinism():
    a = sample_uniform(RngStream(7, 3), size=100)
    b = sample_uniform(RngStream(7, 3), size=100)
    assert np.array_equal(a, b)
    c = sample_uniform(RngStream(7, 4), size=100)
    assert not np.array_equal(a, c)


def test_streams_uncorrelated():
    a = sample_uniform(RngStream(11, 0), size=100_000)
    b = sample_uniform(RngStream(11, 1), size=100_000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(len(a))
