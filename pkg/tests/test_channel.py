import math

import numpy as np
import pytest
from scipy import stats

from cvqkd_rr.channel import (ChannelParams, RawKeys, likelihood_b_given_a, posterior_a_given_b,
                              sample_alice, transmission_from_distance, transmit)
from cvqkd_rr.numerics import integrate_adaptive, rng_stream

N = 10 ** 6


def test_transmission_from_distance():
    assert transmission_from_distance(0.0) == 1.0
    assert transmission_from_distance(100.0) == pytest.approx(0.01, rel=1e-12)
    assert transmission_from_distance(150.0) == pytest.approx(0.001, rel=1e-12)
    assert transmission_from_distance(15.0, 3.1 / 15) == pytest.approx(10 ** -0.31)
    with pytest.raises(ValueError):
        transmission_from_distance(-1.0)


def test_params_validation():
    with pytest.raises(ValueError):
        ChannelParams(transmission=1.5)
    with pytest.raises(ValueError):
        ChannelParams(transmission=0.5, excess_noise=-0.1)
    p = ChannelParams.from_distance(100.0)
    assert p.loss_db == pytest.approx(20.0)


def test_sample_alice_moments():
    p = ChannelParams(0.5)
    a = sample_alice(p, rng_stream(1), N)
    assert 495 <= a.var() <= 505
    assert abs(a.mean()) < 4 * math.sqrt(500 / N)
    zero = sample_alice(ChannelParams(0.5, modulation_variance=0.0), rng_stream(1), 10)
    assert np.all(zero == 0)


@pytest.mark.parametrize("g, xi, a0, var", [(1.0, 0.0, 5.0, 1.0), (0.01, 0.0, 10.0, 1.0),
                                            (0.5, 1.0, 2.0, 1.5)])
def test_transmit_conditional_moments(g, xi, a0, var):
    p = ChannelParams(g, xi)
    b = transmit(np.full(N, a0), p, rng_stream(2))
    assert abs(b.mean() - math.sqrt(g) * a0) < 4 * math.sqrt(var / N)
    # sample variance se is var * sqrt(2/n)
    assert abs(b.var() - var) < 4 * var * math.sqrt(2 / N)


def test_bob_marginal_variance():
    p = ChannelParams(0.1, 0.2)
    a = sample_alice(p, rng_stream(3), N)
    b = transmit(a, p, rng_stream(4))
    v = p.transmission * 500 + 1 + p.transmission * 0.2
    assert p.bob_variance == pytest.approx(v)
    assert abs(b.var() - v) < 4 * v * math.sqrt(2 / N)


def test_xi_zero_recovers_unit_variance():
    assert ChannelParams(0.3, 0.0).bob_conditional_variance == 1.0


def test_likelihood_peak_and_histogram():
    p = ChannelParams(0.2, 0.5)
    a0 = 3.0
    peak = likelihood_b_given_a(math.sqrt(0.2) * a0, a0, p)
    assert peak == pytest.approx(1 / math.sqrt(2 * math.pi * 1.1))
    b = transmit(np.full(N, a0), p, rng_stream(5))
    edges = np.linspace(-4, 4, 41) * math.sqrt(1.1) + math.sqrt(0.2) * a0
    counts, _ = np.histogram(b, edges)
    sd = math.sqrt(1.1)
    cdf = stats.norm.cdf(edges, math.sqrt(0.2) * a0, sd)
    expected = np.diff(cdf) * N
    chi2 = np.sum((counts - expected) ** 2 / expected)
    # allow for the clipped tails by renormalising to the counted total
    assert stats.chi2.sf(chi2, len(counts) - 1) > 0.01


def test_posterior_moments_match_quadrature():
    p = ChannelParams(0.05, 0.3)
    b = 1.7
    mean, var = posterior_a_given_b(b, p)
    prior = lambda a: np.exp(-a * a / 1000) / math.sqrt(1000 * math.pi)
    joint = lambda a: prior(a) * likelihood_b_given_a(b, a, p)
    z = integrate_adaptive(joint, -math.inf, math.inf)
    m1 = integrate_adaptive(lambda a: a * joint(a), -math.inf, math.inf) / z
    m2 = integrate_adaptive(lambda a: (a - m1) ** 2 * joint(a), -math.inf, math.inf) / z
    d = 0.05 * 500 + 1 + 0.05 * 0.3
    assert mean == pytest.approx(math.sqrt(0.05) * 500 * b / d, rel=1e-12)
    assert var == pytest.approx(500 * (1 + 0.05 * 0.3) / d, rel=1e-12)
    assert m1 == pytest.approx(mean, abs=1e-6)
    assert m2 == pytest.approx(var, abs=1e-6)
    post = lambda a: np.exp(-(a - mean) ** 2 / (2 * var)) / math.sqrt(2 * math.pi * var)
    assert integrate_adaptive(post, -math.inf, math.inf) == pytest.approx(1.0, abs=1e-8)


def test_raw_keys_subset():
    raw = RawKeys(np.arange(5.0), np.arange(5.0) * 2, np.arange(5.0) * 3, np.zeros(5, np.uint8))
    sub = raw.subset(slice(1, 3))
    assert np.array_equal(sub.c, [3.0, 6.0])
