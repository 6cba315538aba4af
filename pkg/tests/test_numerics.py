import math
from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from cvqkd_rr.numerics import (QuadratureError, QuadratureSpec, binary_entropy,
                               gauss_legendre_panels, gaussian_cdf, gaussian_interval_mass,
                               gaussian_log_interval_mass, gaussian_pdf, integrate_adaptive,
                               rng_stream)


def _entropy_oracle(p):
    getcontext().prec = 40
    p = Decimal(p)
    q = 1 - p
    return float(-(p * p.ln() + q * q.ln()) / Decimal(2).ln())


def test_binary_entropy_examples():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert abs(binary_entropy(0.11) - 0.5) < 1e-3
    assert binary_entropy(0.11) == pytest.approx(_entropy_oracle("0.11"), abs=1e-14)


@pytest.mark.parametrize("bad", [-0.1, 1.1, float("nan")])
def test_binary_entropy_domain(bad):
    with pytest.raises(ValueError):
        binary_entropy(bad)


def test_binary_entropy_symmetry():
    lam = np.random.default_rng(1).uniform(0, 1, 1000)
    assert np.max(np.abs(binary_entropy(lam) - binary_entropy(1 - lam))) < 1e-12


@given(st.floats(1e-9, 1 - 1e-9))
def test_binary_entropy_bounds(p):
    h = binary_entropy(p)
    assert 0.0 <= h <= 1.0


def test_gaussian_pdf_examples():
    assert gaussian_pdf(0, 0, 1) == pytest.approx(0.3989, abs=1e-4)
    assert gaussian_pdf(1, 0, 2) == pytest.approx(math.exp(-0.25) / math.sqrt(4 * math.pi), rel=1e-14)
    assert gaussian_pdf(1, 0, 2) == pytest.approx(0.2197, abs=1e-4)


@given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3))
def test_gaussian_pdf_translation(mu, v):
    assert gaussian_pdf(mu, mu, v) == pytest.approx(1 / math.sqrt(2 * math.pi * v), rel=1e-12)


def test_gaussian_pdf_rejects_bad_variance():
    with pytest.raises(ValueError):
        gaussian_pdf(0.0, 0.0, 0.0)


def test_gaussian_cdf_examples():
    assert gaussian_cdf(0, 0, 1) == 0.5
    assert gaussian_cdf(math.inf, 3.0, 2.0) == 1.0
    assert gaussian_cdf(1, 0, 1) == pytest.approx(0.5 * (1 + math.erf(1 / math.sqrt(2))), abs=1e-15)
    assert gaussian_cdf(1, 0, 1) == pytest.approx(0.84134, abs=1e-5)


def test_cdf_derivative_is_pdf():
    x = np.linspace(-5, 5, 100)
    h = 1e-5
    deriv = (gaussian_cdf(x + h, 0.3, 1.7) - gaussian_cdf(x - h, 0.3, 1.7)) / (2 * h)
    assert np.max(np.abs(deriv - gaussian_pdf(x, 0.3, 1.7))) < 1e-6


def test_interval_mass_far_tail():
    # naive differencing of the cdf would give 0 here
    m = gaussian_interval_mass(30.0, 31.0, 0.0, 1.0)
    assert m > 0
    lm = gaussian_log_interval_mass(30.0, 31.0, 0.0, 1.0)
    assert lm == pytest.approx(math.log(m), rel=1e-10)
    assert gaussian_interval_mass(-31.0, -30.0) == pytest.approx(m, rel=1e-12)
    # beyond double range the mass underflows but its log does not
    assert gaussian_log_interval_mass(40.0, 41.0) == pytest.approx(-800 - math.log(40 * math.sqrt(2 * math.pi)), abs=0.01)


def test_integrate_basic():
    spec = QuadratureSpec()
    assert integrate_adaptive(lambda x: gaussian_pdf(x, 1.0, 4.0), -math.inf, math.inf, spec) \
        == pytest.approx(1.0, abs=1e-9)
    assert integrate_adaptive(lambda x: x, 0.0, 1.0, spec) == pytest.approx(0.5, abs=1e-12)
    assert integrate_adaptive(lambda x: np.exp(-x), 0.0, math.inf, spec) == pytest.approx(1.0, abs=1e-9)
    assert integrate_adaptive(lambda x: x, 1.0, 0.0, spec) == pytest.approx(-0.5, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.floats(0.1, 10), st.floats(0.1, 10), st.floats(-5, 5))
def test_integrate_gaussian_convolution(y, v1, v2, mu):
    f = lambda x: gaussian_pdf(x, mu, v1) * gaussian_pdf(y - x, 0.0, v2)
    got = integrate_adaptive(f, -math.inf, math.inf)
    assert got == pytest.approx(gaussian_pdf(y, mu, v1 + v2), abs=1e-8)


def test_integrate_matches_scipy_quad():
    f = lambda x: np.sin(3 * x) ** 2 * np.exp(-0.1 * x * x)
    ref, _ = integrate.quad(f, -20, 20, epsabs=1e-13, limit=200)
    assert integrate_adaptive(f, -20, 20) == pytest.approx(ref, abs=1e-9)


def test_integrate_nonconvergence_raises():
    spec = QuadratureSpec(absolute_tolerance=1e-14, relative_tolerance=1e-14, max_subdivisions=3)
    with pytest.raises(QuadratureError):
        integrate_adaptive(lambda x: np.abs(np.sin(50 * x)), 0.0, 10.0, spec)


def test_integrate_markov_chain_vs_monte_carlo():
    # P(c|b) = integral of P(c|a) P(a|b) da against sampled (b, c) pairs
    g, va, ne = 0.1, 5.0, 1.0 / 0.9
    rng = np.random.default_rng(7)
    n = 10 ** 6
    a = rng.normal(0, math.sqrt(va), n)
    b = math.sqrt(g) * a + rng.normal(0, 1, n)
    c = a + rng.normal(0, math.sqrt(ne), n)
    b0 = 0.5
    sel = np.abs(b - b0) < 0.02
    mean_ab = math.sqrt(g) * va * b0 / (g * va + 1)
    var_ab = va / (g * va + 1)
    c_lo, c_hi = 0.0, 1.5
    p_in = integrate_adaptive(
        lambda x: gaussian_pdf(x, mean_ab, var_ab)
        * (gaussian_cdf(c_hi, x, ne) - gaussian_cdf(c_lo, x, ne)), -math.inf, math.inf)
    hits = (c[sel] > c_lo) & (c[sel] < c_hi)
    se = math.sqrt(p_in * (1 - p_in) / sel.sum())
    assert abs(hits.mean() - p_in) < 3 * se


def test_gauss_legendre_panels_polynomial():
    x, w = gauss_legendre_panels(np.array([0.0, -1.0]), np.array([2.0, 3.0]), panels=3, order=4)
    assert x.shape == (2, 12)
    got = np.sum(w * x ** 5, axis=-1)
    assert got == pytest.approx([2 ** 6 / 6, (3 ** 6 - 1) / 6], rel=1e-12)


def test_rng_determinism_and_streams():
    a = rng_stream(42, 3).standard_normal(100)
    b = rng_stream(42, 3).standard_normal(100)
    c = rng_stream(42, 4).standard_normal(100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(rng_stream(42, 3).child(0).uniform(10),
                              rng_stream(42, 3).child(1).uniform(10))


def test_rng_moments():
    x = rng_stream(0, 0).standard_normal(10 ** 6)
    assert abs(x.mean()) < 4 / math.sqrt(1e6)
    assert abs(x.var() - 1.0) < 0.01
    u = rng_stream(0, 1).uniform(10 ** 5)
    assert u.min() >= 0 and u.max() < 1


def test_integrate_offset_narrow_peak():
    # regression: a peak between the first panel's nodes used to be missed
    f = lambda x: gaussian_pdf(x, 5.0, 0.109375) * gaussian_pdf(5.0 - x, 0.0, 0.109375)
    assert integrate_adaptive(f, -math.inf, math.inf) == pytest.approx(
        gaussian_pdf(5.0, 5.0, 0.21875), abs=1e-8)
    far = lambda x: gaussian_pdf(x, 300.0, 0.01)
    assert integrate_adaptive(far, -math.inf, math.inf, center=300.0, scale=0.1) == \
        pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        integrate_adaptive(far, -math.inf, math.inf, scale=0.0)
