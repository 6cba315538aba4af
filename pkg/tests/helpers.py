"""Sampling helpers shared by the Monte-Carlo oracle tests."""

import math

import numpy as np
from scipy.special import ndtr, ndtri

from cvqkd_rr.pairing import log_region_mass


def sample_pair(grid, params, left, n, rng):
    """Alice's element drawn from the prior restricted to one pair; returns (a, side)."""
    right = left + grid.separation
    lm = float(log_region_mass(grid, left, params))
    rm = float(log_region_mass(grid, right, params))
    p_right = 1.0 / (1.0 + math.exp(lm - rm))
    side = (rng.uniform(size=n) < p_right).astype(np.int64)
    region = np.where(side == 1, right, left)
    lo, hi = grid.region_bounds(region)
    sd = math.sqrt(params.alice_variance)
    u = rng.uniform(size=n)
    a = sd * ndtri(ndtr(lo / sd) + u * (ndtr(hi / sd) - ndtr(lo / sd)))
    return a, side


def sample_triples(grid, params, eve, left, n, rng):
    a, side = sample_pair(grid, params, left, n, rng)
    b = math.sqrt(params.transmission) * a + rng.normal(0, math.sqrt(params.bob_conditional_variance), n)
    c = math.sqrt(eve.alpha) * a + rng.normal(0, math.sqrt(eve.variance), n)
    return a, side, b, c


def plugin_info(bits, labels):
    """Plug-in I(B : label) in bits."""
    from cvqkd_rr.numerics import binary_entropy

    bits = np.asarray(bits, dtype=float)
    h_b = binary_entropy(bits.mean())
    _, inv = np.unique(labels, return_inverse=True)
    cnt = np.bincount(inv)
    ones = np.bincount(inv, weights=bits)
    return h_b - float(np.sum(cnt * binary_entropy(ones / cnt)) / cnt.sum())


def beam_splitter_rate(g, va):
    """I(A:B) - I(B:E) for a pure-loss beam splitter, from conditional variances.

    Modes: Alice's displacement a, her vacuum n, the splitter's vacuum v.
    b = sqrt(g)(a + n) + sqrt(1-g) v,  e = sqrt(1-g)(a + n) - sqrt(g) v.
    """
    cov_in = np.diag([va, 1.0, 1.0])
    m = np.array([[1.0, 0.0, 0.0],
                  [math.sqrt(g), math.sqrt(g), math.sqrt(1 - g)],
                  [math.sqrt(1 - g), math.sqrt(1 - g), -math.sqrt(g)]])
    cov = m @ cov_in @ m.T      # order (a, b, e)

    def cond(i, j):
        return cov[i, i] - cov[i, j] ** 2 / cov[j, j]

    return 0.5 * math.log2(cond(1, 2) / cond(1, 0))
