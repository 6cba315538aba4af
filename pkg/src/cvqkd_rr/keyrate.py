"""Key-rate accounting: grouped rate, excess-noise penalty, Gaussian benchmark, thresholds."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .cells import CellTable, engine_for
from .channel import ChannelParams
from .decoder import GroupId, GroupingPolicy
from .eve import eve_params
from .numerics import _clipped_entropy, binary_entropy
from .pairing import DeltaARule, build_grid


@dataclass
class GroupSummary:
    group: GroupId
    probability: float      # fraction of raw key elements landing in the group
    count: int
    i_ab: float
    i_eb: float
    h_a: float
    h_b: float
    mean_ber: float
    mean_ber_ae: float = float("nan")
    i_eb_conditioned: float = float("nan")
    i_eb_unconditioned: float = float("nan")

    @property
    def mean_gamma(self) -> float:
        """Group average of Gamma(ber), the term subtracted from H_BG(A)."""
        return self.h_a - self.i_ab


@dataclass
class KeyRateReport:
    n: int
    practical_rate: float
    theoretical_rate: float
    penalty_2hprime: float
    groups: list[GroupSummary] = field(default_factory=list)
    kept_fraction: float = float("nan")
    mean_ber_ab: float = float("nan")
    mean_ber_ae: float = float("nan")

    @property
    def efficiency(self) -> float:
        if self.theoretical_rate <= 0:
            return float("nan")
        return self.practical_rate / self.theoretical_rate

    @property
    def non_positive(self) -> bool:
        return self.practical_rate <= 0

    @property
    def clamped_rate(self) -> float:
        return max(self.practical_rate, 0.0)


def h_prime(transmission: float, excess_noise: float) -> float:
    """Entropy excess 0.5*log2(1 + G xi) of Bob's conditional distribution."""
    return 0.5 * math.log2(1.0 + transmission * excess_noise)


def vacuum_entropy(shot_noise: float = 1.0) -> float:
    """Differential entropy (bits) of one vacuum quadrature."""
    return 0.5 * math.log2(2.0 * math.pi * math.e * shot_noise)


def group_info_ab(alice_bits, bers) -> float:
    """I_BG(A:B) = H_BG(A) - mean Gamma(ber) from a group's observed bits and BERs."""
    alice_bits = np.asarray(alice_bits)
    bers = np.asarray(bers, dtype=float)
    if alice_bits.size == 0:
        raise ValueError("empty group")
    return binary_entropy(alice_bits.mean()) - float(np.mean(binary_entropy(bers)))


def summarize_cells(table: CellTable, policy: GroupingPolicy, counts=None, n: int | None = None,
                    min_prob: float = 1e-300) -> list[GroupSummary]:
    """Turn cell statistics into group summaries.

    Without ``counts`` the model probabilities are used. With ``counts`` (same
    shape as the table) group probabilities are the observed frequencies
    ``count / n`` and the model supplies the per-bit information values.
    """
    if counts is None:
        weight = table.prob
        mask = weight > min_prob
        prob = weight
        cnt = np.zeros_like(weight, dtype=np.int64)
    else:
        cnt = np.asarray(counts, dtype=np.int64)
        mask = cnt > 0
        prob = cnt / float(n)
        weight = cnt.astype(float)
    buckets = policy.bucket_of(table.log_ratio)
    i_c, i_u = table.i_eb_conditioned, table.i_eb_unconditioned
    if policy.key == "pair":
        out = []
        h_a, h_b, i_ab, i_eb = table.h_a, table.h_b, table.i_ab, table.i_eb(policy.eve_rule)
        for p, j in zip(*np.nonzero(mask)):
            out.append(GroupSummary(
                GroupId(int(table.lefts[p]), int(j), int(buckets[p])),
                float(prob[p, j]), int(cnt[p, j]), float(i_ab[p, j]), float(i_eb[p, j]),
                float(h_a[p, j]), float(h_b[p, j]), float(table.mean_ber[p, j]),
                float(table.ber_ae[p, j]), float(i_c[p, j]), float(i_u[p, j])))
        return out

    # Pooled groups: Eve still knows each bit's pair, so her conditional entropies
    # are averaged per pair, while the frequencies of A and B are pooled.
    acc = defaultdict(lambda: np.zeros(10))
    for p, j in zip(*np.nonzero(mask)):
        wt = weight[p, j]
        acc[(int(j), int(buckets[p]))] += wt * np.array([
            1.0, table.p_a1[p, j], table.p_b1[p, j], table.mean_gamma[p, j],
            table.h_b_given_c[p, j], table.h_b_given_c_unconditioned[p, j],
            table.mean_ber[p, j], table.ber_ae[p, j], prob[p, j] / wt, cnt[p, j] / wt])
    out = []
    for (j, k), v in sorted(acc.items()):
        tot = v[0]
        p_a1, p_b1, mg, hc, hu, mb, bae = v[1:8] / tot
        h_a, h_b = float(_clipped_entropy(p_a1)), float(_clipped_entropy(p_b1))
        ic, iu = h_b - hc, h_b - hu
        out.append(GroupSummary(GroupId(None, j, k), float(v[8]), int(round(v[9])),
                                h_a - mg, max(ic, iu) if policy.eve_rule == "max" else ic,
                                h_a, h_b, mb, bae, ic, iu))
    return out


def practical_key_rate(groups: list[GroupSummary], n: int, params: ChannelParams) -> KeyRateReport:
    """Per-pulse rate sum_G P(G) (I_AB - I_EB) - 2H'."""
    penalty = 2.0 * h_prime(params.transmission, params.excess_noise)
    rate = math.fsum(g.probability * (g.i_ab - g.i_eb) for g in groups) - penalty
    kept = math.fsum(g.probability for g in groups)
    report = KeyRateReport(n=n, practical_rate=rate, theoretical_rate=theoretical_rate(params),
                           penalty_2hprime=penalty, groups=groups, kept_fraction=kept)
    if kept > 0:
        report.mean_ber_ab = math.fsum(g.probability * g.mean_ber for g in groups) / kept
        report.mean_ber_ae = math.fsum(g.probability * g.mean_ber_ae for g in groups) / kept
    return report


def theoretical_rate(params: ChannelParams) -> float:
    """Reverse-reconciliation Gaussian rate in bits per pulse."""
    g = params.transmission
    if g <= 0:
        raise ValueError("transmission must be positive")
    v = params.modulation_variance + 1.0
    chi = (1.0 - g) / g + params.excess_noise
    return -0.5 * math.log2(g * g * (1.0 + chi) * (1.0 / v + chi))


def markov_rate(transmission: float, modulation_variance: float) -> float:
    """Noise-free rate 0.5*log2(V / ((1-G) V + G))."""
    v = modulation_variance + 1.0
    g = transmission
    return 0.5 * math.log2(v / ((1.0 - g) * v + g))


def gaussian_rate_oracle(transmission: float, modulation_variance: float) -> float:
    """I(A:B) - I(B:E) for a pure-loss beam-splitter channel, from the covariance matrix.

    Alice's displacement ``x`` (variance V_A) plus vacuum enters a beam splitter
    of transmission G; Bob gets one output and Eve the other, with Eve's vacuum
    in the second input.
    """
    g, va = transmission, modulation_variance
    # rows: x_A, vacuum on Alice's state, Eve's injected vacuum
    sources = np.diag([va, 1.0, 1.0])
    mix = np.array([
        [1.0, 0.0, 0.0],                                              # A
        [math.sqrt(g), math.sqrt(g), math.sqrt(1.0 - g)],             # B
        [math.sqrt(1.0 - g), math.sqrt(1.0 - g), -math.sqrt(g)],      # E
    ])
    cov = mix @ sources @ mix.T

    def cond_var(i, j):
        return cov[i, i] - cov[i, j] ** 2 / cov[j, j]

    v_b = cov[1, 1]
    i_ab = 0.5 * math.log2(v_b / cond_var(1, 0))
    i_be = 0.5 * math.log2(v_b / cond_var(1, 2))
    return i_ab - i_be


def efficiency(report: KeyRateReport) -> float:
    if report.theoretical_rate <= 0:
        raise ValueError("efficiency undefined for non-positive theoretical rate")
    return report.practical_rate / report.theoretical_rate


class NoRootError(ValueError):
    pass


def xi_threshold(transmission: float, modulation_variance: float = 500.0,
                 reconciliation_efficiency: float = 1.0, xi_max: float = 10.0,
                 tol: float = 1e-6) -> float:
    """Excess noise where gamma * (noise-free rate) - 2H'(xi) crosses zero, by bisection."""
    gamma = reconciliation_efficiency
    if not 0.0 < gamma <= 1.0:
        raise ValueError("reconciliation efficiency must lie in (0, 1]")
    base = gamma * markov_rate(transmission, modulation_variance)

    def f(xi):
        return base - 2.0 * h_prime(transmission, xi)

    lo, hi = 0.0, xi_max
    if f(lo) <= 0 or f(hi) > 0:
        raise NoRootError(f"rate does not change sign on [0, {xi_max}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cascade_ber(e1: float, e2: float) -> float:
    """Error rate of two binary symmetric channels in series."""
    for e in (e1, e2):
        if not 0.0 <= e <= 0.5:
            raise ValueError("error rates must lie in [0, 0.5]")
    # exact summation keeps the (e, 0) and (e, 0.5) limits exact
    return math.fsum((e1, e2, -2.0 * e1 * e2))


def analytic_report(params: ChannelParams, policy: GroupingPolicy = GroupingPolicy(),
                    rule: DeltaARule = DeltaARule(), separation: int = 7,
                    nodes: int = 3) -> KeyRateReport:
    """Key-rate report from the model alone (no sampling)."""
    import warnings

    from .pairing import GridWarning

    eve = eve_params(params)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridWarning)
        grid = build_grid(params, eve.noise_variance, rule, separation)
    table = engine_for(params, grid, policy, eve, nodes).table()
    groups = summarize_cells(table, policy)
    return practical_key_rate(groups, 0, params)
