"""Bob's side: soft posteriors over Alice's bit, hard decisions, post-selection, grouping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .channel import ChannelParams
from .pairing import PairLabel, PairingGrid, log_region_mass


@dataclass(frozen=True)
class GroupingPolicy:
    """Post-selection cut and group definition.

    ``key="pair"`` groups bits of one pair with similar BER (one group per
    pair and BER bin). ``key="imbalance"`` pools pairs whose prior imbalance
    ``|log P(left)/P(right)|`` falls in the same bucket.

    ``eve_rule`` picks Eve's information per group: ``"conditioned"`` uses her
    group-aware predictor (the mutual information itself); ``"max"`` also
    considers the predictor that ignores the group's b-intervals and keeps
    the larger value.
    """

    ber_cut: float = 0.40
    ber_bin_width: float = 0.01
    key: str = "pair"
    imbalance_buckets: int = 4
    imbalance_bucket_width: float = 0.1
    eve_rule: str = "conditioned"

    def __post_init__(self):
        if not 0.0 < self.ber_cut <= 0.5:
            raise ValueError("ber_cut must lie in (0, 0.5]")
        if self.ber_bin_width <= 0:
            raise ValueError("ber_bin_width must be positive")
        ratio = self.ber_cut / self.ber_bin_width
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("ber_bin_width must divide ber_cut into whole bins")
        if self.key not in ("pair", "imbalance"):
            raise ValueError(f"unknown group key {self.key!r}")
        if self.eve_rule not in ("conditioned", "max"):
            raise ValueError(f"unknown eve_rule {self.eve_rule!r}")
        if self.imbalance_buckets < 1:
            raise ValueError("need at least one imbalance bucket")

    @property
    def n_bins(self) -> int:
        return int(round(self.ber_cut / self.ber_bin_width))

    def llr_edges(self) -> np.ndarray:
        """|LLR| thresholds: bin j holds |LLR| in (edges[j+1], edges[j]]; edges[0] = inf."""
        ber = np.arange(self.n_bins + 1) * self.ber_bin_width
        with np.errstate(divide="ignore"):
            return np.log((1.0 - ber) / ber)

    def bin_of(self, ber):
        j = np.floor(np.asarray(ber) / self.ber_bin_width + 1e-12).astype(np.int64)
        return np.minimum(j, self.n_bins - 1)

    def bucket_of(self, log_ratio):
        b = np.floor(np.abs(np.asarray(log_ratio)) / self.imbalance_bucket_width).astype(np.int64)
        return np.minimum(b, self.imbalance_buckets - 1)


@dataclass(frozen=True, order=True)
class GroupId:
    pair: int | None  # left index of the pair; None when pairs are pooled
    ber_bin: int
    bucket: int


@dataclass
class SoftBit:
    pair: PairLabel
    b: float
    p0: float
    p1: float
    decision: int
    ber: float
    kept: bool = False
    group: GroupId | None = None


def prior_log_ratio(lefts, params: ChannelParams, grid: PairingGrid, exact: bool = True):
    """log P(right region) - log P(left region) for each pair."""
    lefts = np.asarray(lefts, dtype=np.int64)
    return (log_region_mass(grid, lefts + grid.separation, params, exact)
            - log_region_mass(grid, lefts, params, exact))


def llr_slope(params: ChannelParams, grid: PairingGrid) -> float:
    return math.sqrt(params.transmission) * grid.delta_a / params.bob_conditional_variance


def bob_llr(b, lefts, params: ChannelParams, grid: PairingGrid, exact: bool = True):
    """log P(1|b) / P(0|b): prior ratio plus the likelihood ratio at the region centres."""
    lefts = np.asarray(lefts, dtype=np.int64)
    mid = grid.left_center(lefts) + 0.5 * grid.delta_a
    u = np.asarray(b, dtype=float) - math.sqrt(params.transmission) * mid
    return prior_log_ratio(lefts, params, grid, exact) + llr_slope(params, grid) * u


def posterior_bits(b, pair, params: ChannelParams, grid: PairingGrid, exact: bool = True):
    """(P(0|b), P(1|b)) for pair(s) ``pair`` (a PairLabel or an array of left indices)."""
    lefts = pair.left if isinstance(pair, PairLabel) else pair
    llr = bob_llr(b, lefts, params, grid, exact)
    p1 = expit(llr)
    p0 = expit(-llr)
    if np.ndim(p1) == 0:
        return float(p0), float(p1)
    return p0, p1


def decide(p0, p1):
    """Hard decision (ties go to 0) and its bit error rate min(p0, p1)."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    bit = (p1 > p0).astype(np.int8)
    ber = np.minimum(p0, p1)
    if bit.ndim == 0:
        return int(bit), float(ber)
    return bit, ber


def post_select(ber, policy: GroupingPolicy):
    kept = np.asarray(ber) <= policy.ber_cut
    return bool(kept) if kept.ndim == 0 else kept


def _group_ids(lefts, bins, buckets, policy: GroupingPolicy):
    if policy.key == "pair":
        return [GroupId(int(l), int(j), int(k)) for l, j, k in zip(lefts, bins, buckets)]
    return [GroupId(None, int(j), int(k)) for j, k in zip(bins, buckets)]


def assign_group(bit: SoftBit, policy: GroupingPolicy, log_ratio: float = 0.0) -> GroupId:
    if not bit.kept:
        raise ValueError("cannot group a discarded bit")
    j = int(policy.bin_of(bit.ber))
    k = int(policy.bucket_of(log_ratio))
    return GroupId(bit.pair.left if policy.key == "pair" else None, j, k)


def soft_bit(b: float, pair: PairLabel, params: ChannelParams, grid: PairingGrid,
             policy: GroupingPolicy, exact: bool = True) -> SoftBit:
    p0, p1 = posterior_bits(b, pair, params, grid, exact)
    decision, ber = decide(p0, p1)
    sb = SoftBit(pair, b, p0, p1, decision, ber, post_select(ber, policy))
    if sb.kept:
        lr = float(prior_log_ratio(pair.left, params, grid, exact))
        sb.group = assign_group(sb, policy, lr)
    return sb


@dataclass
class DecodedBatch:
    """Vectorised Bob output for a batch of pulses."""

    lefts: np.ndarray
    p1: np.ndarray
    decision: np.ndarray
    ber: np.ndarray
    kept: np.ndarray
    ber_bin: np.ndarray  # -1 for discarded pulses
    bucket: np.ndarray

    def group_ids(self, policy: GroupingPolicy) -> list[GroupId]:
        idx = np.flatnonzero(self.kept)
        return _group_ids(self.lefts[idx], self.ber_bin[idx], self.bucket[idx], policy)


def decode_batch(b, lefts, params: ChannelParams, grid: PairingGrid,
                 policy: GroupingPolicy, exact: bool = True) -> DecodedBatch:
    lefts = np.asarray(lefts, dtype=np.int64)
    llr = bob_llr(b, lefts, params, grid, exact)
    p1 = expit(llr)
    decision, ber = decide(expit(-llr), p1)
    kept = post_select(ber, policy)
    bins = np.where(kept, policy.bin_of(ber), -1)
    buckets = policy.bucket_of(prior_log_ratio(lefts, params, grid, exact))
    return DecodedBatch(lefts, p1, decision, ber, kept, bins, buckets)
