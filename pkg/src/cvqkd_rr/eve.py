"""The Gaussian eavesdropper restricted to the chain Eve -> Alice -> Bob.

Eve holds ``c = sqrt(alpha) * a + noise`` with noise variance ``alpha * N_E``.
Her knowledge of Bob's bit runs entirely through her estimate of which side
of the announced pair Alice's element sits on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .channel import ChannelParams
from .numerics import (DEFAULT_QUADRATURE, QuadratureSpec, RngStream,
                       _clipped_entropy, integrate_adaptive)


@dataclass(frozen=True)
class EveParams:
    noise_variance: float
    alpha: float = 1.0

    def __post_init__(self):
        if self.noise_variance <= 0 or self.alpha <= 0:
            raise ValueError("Eve's noise variance and scale must be positive")

    @property
    def variance(self) -> float:
        """Variance of ``c`` given ``a``."""
        return self.alpha * self.noise_variance


def eve_noise_variance(params: ChannelParams) -> float:
    """Minimum noise N_E on Eve's estimate of Alice's element.

    ``N0 / (1 - G)`` without excess noise, ``N0 + N0 / ((1 - G)/G + xi)`` with it.
    """
    g, xi, n0 = params.transmission, params.excess_noise, params.shot_noise
    if not 0.0 < g < 1.0:
        raise ValueError("Eve's noise is undefined for a lossless channel (G = 1)")
    if xi == 0.0:
        return n0 / (1.0 - g)
    return n0 + n0 / ((1.0 - g) / g + xi)


def eve_params(params: ChannelParams, alpha: float = 1.0) -> EveParams:
    return EveParams(eve_noise_variance(params), alpha)


def sample_eve(a, eve: EveParams, rng: RngStream):
    a = np.asarray(a, dtype=float)
    out = math.sqrt(eve.alpha) * a + math.sqrt(eve.variance) * rng.standard_normal(a.shape)
    return float(out) if out.ndim == 0 else out


def posterior_pair_side(centers, c, priors, eve: EveParams):
    """Eve's (P(|a0>|c), P(|a0 + delta_a>|c)) from the two pair centres and side priors."""
    a0, a1 = centers
    p0, p1 = priors
    s = math.sqrt(eve.alpha)
    c = np.asarray(c, dtype=float)
    # log-odds of the right side
    lo = (np.log(p1) - np.log(p0)
          + ((c - s * np.asarray(a0)) ** 2 - (c - s * np.asarray(a1)) ** 2) / (2.0 * eve.variance))
    right = expit(lo)
    left = expit(-lo)
    if right.ndim == 0:
        return float(left), float(right)
    return left, right


def p_bob1_given_c(pair, c, params: ChannelParams, grid, *, eve: EveParams | None = None,
                   policy=None, ber_bin: int | None = None, nodes: int = 1,
                   conditioned: bool = True):
    """Eve's probability that Bob assigns 1, given her value ``c``.

    Mixture over the pair sides weighted by Eve's posterior. With ``ber_bin``
    (and ``policy``) Bob's assignment probabilities are conditioned on his
    value falling in that group's intervals. ``nodes=1`` evaluates each side at
    its region centre.
    """
    from .cells import PairModel  # circular at import time

    eve = eve or eve_params(params)
    left = pair.left if hasattr(pair, "left") else int(pair)
    pm = PairModel.build(params, grid, policy, eve, np.array([left]), nodes=nodes)
    c = np.asarray(c, dtype=float)
    flat = np.atleast_1d(c)[None, :]
    if ber_bin is None:
        out = pm.p_bob1_ungrouped(flat)[0]
    else:
        out = pm.p_bob1_given_c(flat, ber_bin, conditioned=conditioned)[0]
    return float(out[0]) if c.ndim == 0 else out


def eve_group_info(pair, ber_bin: int, params: ChannelParams, grid, policy,
                   eve: EveParams | None = None, spec: QuadratureSpec = DEFAULT_QUADRATURE,
                   nodes: int = 3, conditioned: bool = True) -> float:
    """I_BG(E:B) for one (pair, BER-bin) group by adaptive quadrature over ``c``.

    ``H_BG(B) - integral P_G(c) Gamma[P(b->1|c)] dc``. The unconditioned
    variant keeps the group's ``P_G(c)`` but lets Eve predict Bob's bit
    without using the group's b-intervals.
    """
    from .cells import PairModel

    eve = eve or eve_params(params)
    left = pair.left if hasattr(pair, "left") else int(pair)
    pm = PairModel.build(params, grid, policy, eve, np.array([left]), nodes=nodes)
    p_cell = pm.cell_prob_given_pair()[0, ber_bin]
    if p_cell <= 0:
        raise ValueError("empty group")
    h_b = float(_clipped_entropy(pm.p_bob1_in_cell()[0, ber_bin]))

    def integrand(c):
        cc = np.asarray(c, dtype=float)[None, :]
        dens = pm.cell_c_density(cc, ber_bin)[0]
        if conditioned:
            q = pm.p_bob1_given_c(cc, ber_bin)[0]
        else:
            q = pm.p_bob1_ungrouped(cc)[0]
        return dens * _clipped_entropy(q)

    lo, hi = pm.c_range()
    h_b_given_c = integrate_adaptive(integrand, float(lo[0]), float(hi[0]), spec)
    return h_b - h_b_given_c
