"""Analytic statistics of every (pair, BER-bin) cell.

Within a pair, Bob's log-likelihood ratio is affine in his value ``b``, so each
BER bin is a pair of ``b`` intervals (one per decision) and every probability
Bob needs is a difference of Gaussian CDFs. Alice's element is integrated
over each region with a few Gauss-Legendre nodes; Eve's value ``c`` is
integrated with composite Gauss-Legendre panels.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .channel import ChannelParams
from .decoder import GroupingPolicy, prior_log_ratio
from .eve import EveParams
from .numerics import (_clipped_entropy, gauss_legendre_panels, gaussian_interval_mass,
                       gaussian_log_interval_mass, gaussian_logpdf)
from .pairing import PairingGrid, relevant_lefts

_U_SIGMAS = 12.0
_C_SIGMAS = 12.0


@dataclass
class PairModel:
    """Node-level description of a batch of pairs (leading axis P)."""

    params: ChannelParams
    grid: PairingGrid
    policy: GroupingPolicy
    eve: EveParams
    lefts: np.ndarray       # (P,)
    a: np.ndarray           # (P, M) node positions of Alice's element
    w: np.ndarray           # (P, M) node weights, summing to 1 per pair
    side: np.ndarray        # (M,) 0 left / 1 right
    log_pair_mass: np.ndarray  # (P,)
    mu: np.ndarray          # (P, M) mean of Bob's centred value u = b - sqrt(G) * mid
    slope: float
    log_ratio: np.ndarray   # (P,)
    u_lo: np.ndarray        # (P, 2, nb) interval bounds, axis 1: decision 0 / decision 1
    u_hi: np.ndarray
    p_in: np.ndarray        # (P, M, 2, nb) P(u in interval | node)
    p_dec1: np.ndarray      # (P, M) P(decision 1 | node), ignoring post-selection

    @classmethod
    def build(cls, params, grid, policy, eve, lefts, nodes: int = 3, exact: bool = True):
        policy = policy or GroupingPolicy()
        lefts = np.asarray(lefts, dtype=np.int64)
        sep = grid.separation
        gx, gw = np.polynomial.legendre.leggauss(nodes)
        regions = np.stack([lefts, lefts + sep], axis=1)            # (P, 2)
        lo, _ = grid.region_bounds(regions)
        a = lo[..., None] + 0.5 * grid.width * (gx + 1.0)            # (P, 2, n)
        log_mass = gaussian_log_interval_mass(lo, lo + grid.width, 0.0, params.alice_variance)
        log_node = np.log(gw) + gaussian_logpdf(a, 0.0, params.alice_variance)
        log_node -= logsumexp(log_node, axis=-1, keepdims=True)
        log_w = (log_node + log_mass[..., None]).reshape(len(lefts), -1)
        log_pair = logsumexp(log_w, axis=1)
        w = np.exp(log_w - log_pair[:, None])
        a = a.reshape(len(lefts), -1)
        side = np.repeat([0, 1], nodes)

        sqrt_g = math.sqrt(params.transmission)
        mid = grid.left_center(lefts) + 0.5 * grid.delta_a
        mu = sqrt_g * (a - mid[:, None])
        slope = sqrt_g * grid.delta_a / params.bob_conditional_variance
        lr = prior_log_ratio(lefts, params, grid, exact)

        # |LLR| in (edges[j+1], edges[j]]  <=>  ber in [j*bw, (j+1)*bw)
        edges = policy.llr_edges()
        sd = math.sqrt(params.bob_conditional_variance)
        u_cap = sqrt_g * (grid.delta_a + grid.width) + _U_SIGMAS * sd
        lrc = lr[:, None]
        d1_lo = (edges[None, 1:] - lrc) / slope
        d1_hi = (edges[None, :-1] - lrc) / slope
        d0_lo = (-edges[None, :-1] - lrc) / slope
        d0_hi = (-edges[None, 1:] - lrc) / slope
        u_lo = np.clip(np.stack([d0_lo, d1_lo], axis=1), -u_cap, u_cap)
        u_hi = np.clip(np.stack([d0_hi, d1_hi], axis=1), -u_cap, u_cap)
        var = params.bob_conditional_variance
        p_in = gaussian_interval_mass(u_lo[:, None], u_hi[:, None],
                                      mu[:, :, None, None], var)
        p_dec1 = gaussian_interval_mass((-lr / slope)[:, None], np.inf, mu, var)
        return cls(params, grid, policy, eve, lefts, a, w, side, log_pair, mu, slope, lr,
                   u_lo, u_hi, p_in, p_dec1)

    # -- Bob / Alice side ---------------------------------------------------
    def cell_prob_given_pair(self):
        return np.einsum("pm,pmdb->pb", self.w, self.p_in)

    def p_alice1_in_cell(self):
        num = np.einsum("pm,m,pmdb->pb", self.w, self.side, self.p_in)
        return num / np.maximum(self.cell_prob_given_pair(), 1e-300)

    def p_bob1_in_cell(self):
        num = np.einsum("pm,pmb->pb", self.w, self.p_in[:, :, 1])
        return num / np.maximum(self.cell_prob_given_pair(), 1e-300)

    def gamma_and_ber(self, order: int = 16):
        """Group averages of Gamma(ber(b)) and ber(b) over each cell, per pair."""
        x, wq = np.polynomial.legendre.leggauss(order)
        half = 0.5 * (self.u_hi - self.u_lo)                       # (P, 2, nb)
        u = 0.5 * (self.u_hi + self.u_lo)[..., None] + half[..., None] * x   # (P,2,nb,Q)
        wu = half[..., None] * wq
        var = self.params.bob_conditional_variance
        dens = np.einsum("pm,pmdbq->pdbq", self.w,
                         np.exp(gaussian_logpdf(u[:, None], self.mu[:, :, None, None, None], var)))
        ber = expit(-np.abs(self.log_ratio[:, None, None, None] + self.slope * u))
        g_sum = np.einsum("pdbq,pdbq->pb", wu * dens, _clipped_entropy(ber))
        b_sum = np.einsum("pdbq,pdbq->pb", wu * dens, ber)
        norm = np.maximum(self.cell_prob_given_pair(), 1e-300)
        return g_sum / norm, b_sum / norm

    # -- Eve side -----------------------------------------------------------
    def c_range(self):
        s = math.sqrt(self.eve.alpha)
        sd = math.sqrt(self.eve.variance)
        return s * self.a.min(axis=1) - _C_SIGMAS * sd, s * self.a.max(axis=1) + _C_SIGMAS * sd

    def _lik(self, c):
        """(P, M, C) density of Eve's value at each node."""
        s = math.sqrt(self.eve.alpha)
        return np.exp(gaussian_logpdf(c[:, None, :], s * self.a[:, :, None], self.eve.variance))

    def cell_c_density(self, c, j):
        lik = self._lik(c)
        pg = self.p_in[:, :, 0, j] + self.p_in[:, :, 1, j]
        num = np.einsum("pm,pmc->pc", self.w * pg, lik)
        return num / np.maximum(self.cell_prob_given_pair()[:, j], 1e-300)[:, None]

    def p_bob1_given_c(self, c, j, conditioned: bool = True):
        if not conditioned:
            return self.p_bob1_ungrouped(c)
        lik = self._lik(c)
        pg = self.p_in[:, :, 0, j] + self.p_in[:, :, 1, j]
        num = np.einsum("pm,pmc->pc", self.w * self.p_in[:, :, 1, j], lik)
        den = np.einsum("pm,pmc->pc", self.w * pg, lik)
        return num / np.maximum(den, 1e-300)

    def p_bob1_ungrouped(self, c):
        lik = self._lik(c)
        num = np.einsum("pm,pmc->pc", self.w * self.p_dec1, lik)
        den = np.einsum("pm,pmc->pc", self.w, lik)
        return num / np.maximum(den, 1e-300)

    def eve_integrals(self, panels: int = 24, order: int = 8):
        """Per cell: H(B|c) under the group-conditioned and unconditioned predictors,
        and Eve's mean error on Alice's side."""
        lo, hi = self.c_range()
        c, wc = gauss_legendre_panels(lo, hi, panels, order)         # (P, C)
        lik = self._lik(c)
        pg = self.p_in[:, :, 0] + self.p_in[:, :, 1]                   # (P, M, nb)
        den = np.einsum("pm,pmb,pmc->pbc", self.w, pg, lik)
        num_b1 = np.einsum("pm,pmb,pmc->pbc", self.w, self.p_in[:, :, 1], lik)
        num_a1 = np.einsum("pm,m,pmb,pmc->pbc", self.w, self.side, pg, lik)
        safe = np.maximum(den, 1e-300)
        q_cond = num_b1 / safe
        q_unc = (np.einsum("pm,pmc->pc", self.w * self.p_dec1, lik)
                 / np.maximum(np.einsum("pm,pmc->pc", self.w, lik), 1e-300))[:, None, :]
        post_a1 = num_a1 / safe
        wden = den * wc[:, None, :]
        norm = np.maximum(self.cell_prob_given_pair(), 1e-300)
        h_cond = np.sum(wden * _clipped_entropy(q_cond), axis=-1) / norm
        h_unc = np.sum(wden * _clipped_entropy(q_unc), axis=-1) / norm
        ber_ae = np.sum(wden * np.minimum(post_a1, 1.0 - post_a1), axis=-1) / norm
        return h_cond, h_unc, ber_ae


@dataclass
class CellTable:
    """Arrays of shape (pairs, bins) describing every cell of the model."""

    lefts: np.ndarray
    log_ratio: np.ndarray
    pair_mass: np.ndarray
    cond_prob: np.ndarray    # P(bin | pair)
    p_a1: np.ndarray
    p_b1: np.ndarray
    mean_gamma: np.ndarray
    mean_ber: np.ndarray
    h_b_given_c: np.ndarray
    h_b_given_c_unconditioned: np.ndarray
    ber_ae: np.ndarray

    @property
    def prob(self):
        return self.pair_mass[:, None] * self.cond_prob

    @property
    def h_a(self):
        return _clipped_entropy(self.p_a1)

    @property
    def h_b(self):
        return _clipped_entropy(self.p_b1)

    @property
    def i_ab(self):
        return self.h_a - self.mean_gamma

    @property
    def i_eb_conditioned(self):
        return self.h_b - self.h_b_given_c

    @property
    def i_eb_unconditioned(self):
        return self.h_b - self.h_b_given_c_unconditioned

    def i_eb(self, rule: str = "conditioned"):
        if rule == "max":
            return np.maximum(self.i_eb_conditioned, self.i_eb_unconditioned)
        return self.i_eb_conditioned

    def rows(self, lefts) -> np.ndarray:
        index = {int(l): k for k, l in enumerate(self.lefts)}
        return np.array([index[int(l)] for l in lefts], dtype=np.int64)


_FIELDS = ("lefts", "log_ratio", "pair_mass", "cond_prob", "p_a1", "p_b1", "mean_gamma",
           "mean_ber", "h_b_given_c", "h_b_given_c_unconditioned", "ber_ae")


def _analyze_chunk(params, grid, policy, eve, lefts, nodes, exact):
    pm = PairModel.build(params, grid, policy, eve, lefts, nodes=nodes, exact=exact)
    mean_gamma, mean_ber = pm.gamma_and_ber()
    h_c, h_u, ber_ae = pm.eve_integrals()
    return dict(lefts=lefts, log_ratio=pm.log_ratio, pair_mass=np.exp(pm.log_pair_mass),
                cond_prob=pm.cell_prob_given_pair(), p_a1=pm.p_alice1_in_cell(),
                p_b1=pm.p_bob1_in_cell(), mean_gamma=mean_gamma, mean_ber=mean_ber,
                h_b_given_c=h_c, h_b_given_c_unconditioned=h_u, ber_ae=ber_ae)


class CellEngine:
    """Computes and memoises cell statistics pair by pair for one model."""

    def __init__(self, params: ChannelParams, grid: PairingGrid, policy: GroupingPolicy,
                 eve: EveParams, nodes: int = 3, exact: bool = True, chunk: int = 32):
        self.params, self.grid, self.policy, self.eve = params, grid, policy, eve
        self.nodes, self.exact, self.chunk = nodes, exact, chunk
        self._cache: dict[int, dict] = {}

    def table(self, lefts=None) -> CellTable:
        if lefts is None:
            lefts = relevant_lefts(self.grid, self.params)
        lefts = np.unique(np.asarray(lefts, dtype=np.int64))
        missing = np.array([l for l in lefts if int(l) not in self._cache], dtype=np.int64)
        for start in range(0, len(missing), self.chunk):
            block = missing[start:start + self.chunk]
            res = _analyze_chunk(self.params, self.grid, self.policy, self.eve, block,
                                 self.nodes, self.exact)
            for k, l in enumerate(block):
                self._cache[int(l)] = {f: res[f][k] for f in _FIELDS}
        rows = [self._cache[int(l)] for l in lefts]
        if not rows:
            nb = self.policy.n_bins
            empty = {f: np.zeros((0, nb)) for f in _FIELDS}
            for f in ("lefts", "log_ratio", "pair_mass"):
                empty[f] = np.zeros(0)
            return CellTable(**empty)
        return CellTable(**{f: np.array([r[f] for r in rows]) for f in _FIELDS})


@functools.lru_cache(maxsize=16)
def engine_for(params: ChannelParams, grid: PairingGrid, policy: GroupingPolicy,
               eve: EveParams, nodes: int = 3, exact: bool = True) -> CellEngine:
    return CellEngine(params, grid, policy, eve, nodes, exact)
