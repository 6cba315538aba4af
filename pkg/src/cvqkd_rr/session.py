"""One Alice/Bob session run end to end over an in-memory public channel."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cells import engine_for
from .channel import ChannelParams, RawKeys, sample_alice, transmit
from .decoder import GroupingPolicy, decode_batch
from .eve import eve_params, posterior_pair_side, sample_eve
from .keyrate import GroupSummary, KeyRateReport, practical_key_rate, summarize_cells
from .numerics import RngStream
from .pairing import DeltaARule, GridWarning, build_grid, log_region_mass, region_of
from .transcript import (ALL_GROUPS, BasisAnnounce, GroupAnnounce, PairAnnounce, PASeed,
                         Sender, SyndromeInfo, Transcript)

MIN_CALIBRATION = 10_000
MIN_NORMALITY = 1_000
DIGEST_BITS = 64
_DIGEST_PRIME = 2 ** 64 - 59


class InsufficientSamples(ValueError):
    pass


class SessionAborted(RuntimeError):
    """The session stopped before a key was produced. ``result`` holds what was computed."""

    def __init__(self, reason: str, result: "SessionResult"):
        super().__init__(reason)
        self.reason = reason
        self.result = result


@dataclass
class ChannelEstimate:
    transmission: float
    excess_noise: float
    transmission_se: float
    excess_noise_se: float
    n: int

    def __iter__(self):
        # unpacks as (G_hat, xi_hat)
        return iter((self.transmission, self.excess_noise))


def estimate_channel(a, b, shot_noise: float = 1.0) -> ChannelEstimate:
    """Transmission and excess noise from disclosed calibration pairs."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = len(a)
    if n < MIN_CALIBRATION:
        raise InsufficientSamples(f"need >= {MIN_CALIBRATION} calibration pairs, got {n}")
    var_a = float(np.var(a))
    if var_a <= 0:
        raise InsufficientSamples("calibration modulation has zero variance")
    ac = a - a.mean()
    bc = b - b.mean()
    t = float(ac @ bc) / (n * var_a)          # sqrt(G)
    resid = bc - t * ac
    v = float(resid @ resid) / (n - 2)
    g = t * t
    xi = (v / shot_noise - 1.0) / g if g > 0 else float("inf")
    t_se = math.sqrt(v / (n * var_a))
    g_se = 2.0 * abs(t) * t_se
    v_se = v * math.sqrt(2.0 / n)
    xi_se = math.hypot(v_se / (shot_noise * g), (v / shot_noise - 1.0) * g_se / g ** 2) if g > 0 \
        else float("inf")
    return ChannelEstimate(g, xi, g_se, xi_se, n)


@dataclass
class NormalityResult:
    skewness: float
    excess_kurtosis: float
    statistic: float   # largest |z| of the two moment statistics
    passed: bool


def normality_check(residuals, z_max: float = 4.0) -> NormalityResult:
    """Moment test: skewness and excess kurtosis within ``z_max`` standard errors of zero."""
    r = np.asarray(residuals, dtype=float)
    n = len(r)
    if n < MIN_NORMALITY:
        raise InsufficientSamples(f"need >= {MIN_NORMALITY} residuals, got {n}")
    d = r - r.mean()
    m2 = float(np.mean(d ** 2))
    skew = float(np.mean(d ** 3)) / m2 ** 1.5
    kurt = float(np.mean(d ** 4)) / m2 ** 2 - 3.0
    z = max(abs(skew) / math.sqrt(6.0 / n), abs(kurt) / math.sqrt(24.0 / n))
    return NormalityResult(skew, kurt, z, z <= z_max)


def ec_leakage(group: GroupSummary, f_ec: float = 1.0) -> float:
    """Bits disclosed to correct one group: f_ec * n_G * (H_BG(A) - I_BG(A:B))."""
    if f_ec < 1.0:
        raise ValueError("f_ec must be >= 1")
    if group.count <= 0:
        raise ValueError("empty group")
    return f_ec * group.count * max(group.mean_gamma, 0.0)


def privacy_amplify(bits, out_len: int, seed: int) -> np.ndarray:
    """Binary Toeplitz hash of ``bits`` down to ``out_len`` bits.

    The Toeplitz matrix T[i, j] = t[i - j + n - 1] is drawn from ``seed``; the
    product is evaluated as a convolution by FFT and rounded back to integers.
    """
    x = np.asarray(bits, dtype=np.uint8)
    n = len(x)
    if out_len < 0 or out_len > n:
        raise ValueError(f"output length {out_len} outside [0, {n}]")
    if out_len == 0:
        return np.zeros(0, dtype=np.uint8)
    t = np.random.Generator(np.random.Philox(seed)).integers(0, 2, n + out_len - 1, dtype=np.uint8)
    size = 1 << (len(t) + n - 1).bit_length()
    conv = np.fft.irfft(np.fft.rfft(t, size) * np.fft.rfft(x, size), size)
    y = np.rint(conv[n - 1:n - 1 + out_len]).astype(np.int64)
    return (y & 1).astype(np.uint8)


def universal_digest(bits, key: int) -> int:
    """Polynomial hash of the bit string over GF(2^64 - 59), keyed by ``key``."""
    x = np.asarray(bits, dtype=np.uint8)
    packed = np.packbits(x, bitorder="little")
    pad = (-len(packed)) % 4
    words = np.frombuffer(packed.tobytes() + b"\0" * pad, dtype="<u4")
    k = key % _DIGEST_PRIME
    h = len(x)
    for w in words.tolist():
        h = (h * k + w) % _DIGEST_PRIME
    return h


Corrector = Callable[[np.ndarray, np.ndarray, np.ndarray, RngStream], np.ndarray]


def ideal_corrector(alice_bits, bob_bits, group_index, rng) -> np.ndarray:
    """Stand-in for a decoder that always succeeds at the accounted leakage."""
    return np.array(bob_bits, dtype=np.uint8, copy=True)


@dataclass(frozen=True)
class SessionConfig:
    distance_km: float = 15.0
    excess_noise: float = 0.0
    n_pulses: int = 100_000
    seed: int = 0
    modulation_variance: float = 500.0
    attenuation_db_per_km: float = 0.2
    policy: GroupingPolicy = field(default_factory=GroupingPolicy)
    delta_a: DeltaARule = field(default_factory=DeltaARule)
    separation: int = 7
    f_ec: float = 1.0
    safety_factor: float = 1.0
    calibration_fraction: float = 0.1
    # "nominal": account with the configured channel after checking the estimate
    # agrees with it; "estimated": plug the estimate into the model.
    channel_model: str = "nominal"
    consistency_z: float = 4.0
    nodes: int = 3
    exact_mass: bool = True

    def __post_init__(self):
        if self.n_pulses <= 0:
            raise ValueError("n_pulses must be positive")
        if not 0.0 <= self.calibration_fraction < 1.0:
            raise ValueError("calibration_fraction must lie in [0, 1)")
        if self.channel_model not in ("nominal", "estimated"):
            raise ValueError(f"unknown channel_model {self.channel_model!r}")
        if self.f_ec < 1.0:
            raise ValueError("f_ec must be >= 1")
        if not 0.0 < self.safety_factor <= 1.0:
            raise ValueError("safety_factor must lie in (0, 1]")

    def channel(self) -> ChannelParams:
        return ChannelParams.from_distance(self.distance_km, self.excess_noise,
                                           self.attenuation_db_per_km,
                                           modulation_variance=self.modulation_variance)


@dataclass
class SessionResult:
    config: SessionConfig
    n: int
    n_calibration: int
    n_key: int
    kept: int
    estimate: ChannelEstimate | None = None
    normality: object = None
    model: ChannelParams | None = None
    report: KeyRateReport | None = None
    groups: list[GroupSummary] = field(default_factory=list)
    leaked_bits: float = 0.0
    secret_bits: float = 0.0
    final_key_alice: np.ndarray | None = None
    final_key_bob: np.ndarray | None = None
    transcript: Transcript = field(default_factory=Transcript)
    empirical_ber_ab: float = float("nan")
    empirical_ber_ae: float = float("nan")
    empirical_i_ab: float = float("nan")

    @property
    def final_key(self) -> np.ndarray | None:
        return self.final_key_bob

    @property
    def final_key_rate(self) -> float:
        if self.final_key_bob is None:
            return 0.0
        return len(self.final_key_bob) / self.n_key

    @property
    def keys_match(self) -> bool:
        return (self.final_key_alice is not None
                and np.array_equal(self.final_key_alice, self.final_key_bob))


def _model_channel(cfg: SessionConfig, true: ChannelParams, est: ChannelEstimate | None,
                   result: SessionResult) -> ChannelParams:
    if est is None:
        return true
    if cfg.channel_model == "estimated":
        if not 0.0 < est.transmission < 1.0:
            raise SessionAborted("estimated transmission outside (0, 1)", result)
        return true.with_estimate(est.transmission, est.excess_noise)
    z_g = abs(est.transmission - true.transmission) / est.transmission_se
    # The nominal excess noise is an upper bound; only a larger estimate is suspicious.
    z_xi = (est.excess_noise - true.excess_noise) / est.excess_noise_se
    if z_g > cfg.consistency_z or z_xi > cfg.consistency_z:
        raise SessionAborted("channel estimate inconsistent with the nominal channel", result)
    return true


def run_session(config: SessionConfig, corrector: Corrector = ideal_corrector,
                stream_id: int = 0) -> SessionResult:
    """Calibrate, announce pairs, decode, group, correct, verify and amplify."""
    cfg = config
    rng = RngStream(cfg.seed, stream_id)
    true = cfg.channel()
    eve_true = eve_params(true)
    n = cfg.n_pulses
    m = int(round(cfg.calibration_fraction * n))
    a = sample_alice(true, rng.child(0), n)
    raw = RawKeys(a, transmit(a, true, rng.child(1)), sample_eve(a, eve_true, rng.child(2)),
                  rng.child(3).integers(0, 2, n).astype(np.uint8))
    result = SessionResult(cfg, n, m, n - m, 0)
    tr = result.transcript
    tr.append(Sender.BOB, BasisAnnounce(raw.basis))

    est = None
    if m > 0:
        cal = raw.subset(slice(0, m))
        est = estimate_channel(cal.a, cal.b, true.shot_noise)
        result.estimate = est
        resid = cal.b - math.sqrt(max(est.transmission, 0.0)) * cal.a
        result.normality = normality_check(resid)
        if not result.normality.passed:
            raise SessionAborted("calibration residuals fail the normality test", result)
    model = _model_channel(cfg, true, est, result)
    result.model = model
    eve_model = eve_params(model)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridWarning)
        grid = build_grid(model, eve_model.noise_variance, cfg.delta_a, cfg.separation)

    key = raw.subset(slice(m, n))
    regions = region_of(grid, key.a)
    lefts = grid.scheme.left_of(regions)
    sides = grid.scheme.side_of(regions).astype(np.uint8)
    tr.append(Sender.ALICE, PairAnnounce(lefts, grid.separation))

    policy = cfg.policy
    dec = decode_batch(key.b, lefts, model, grid, policy, cfg.exact_mass)
    kept_idx = np.flatnonzero(dec.kept)
    result.kept = len(kept_idx)
    k_lefts = lefts[kept_idx]
    k_bins = dec.ber_bin[kept_idx]
    engine = engine_for(model, grid, policy, eve_model, cfg.nodes, cfg.exact_mass)
    table = engine.table(np.unique(k_lefts))
    rows = table.rows(k_lefts) if len(kept_idx) else np.zeros(0, dtype=np.int64)
    counts = np.zeros(table.cond_prob.shape, dtype=np.int64)
    np.add.at(counts, (rows, k_bins), 1)
    groups = summarize_cells(table, policy, counts, result.n_key)
    result.groups = groups

    # kept bit -> position in the announced group table
    if policy.key == "pair":
        keys = list(zip(k_lefts.tolist(), k_bins.tolist()))
        index = {(g.group.pair, g.group.ber_bin): i for i, g in enumerate(groups)}
    else:
        keys = list(zip(k_bins.tolist(), dec.bucket[kept_idx].tolist()))
        index = {(g.group.ber_bin, g.group.bucket): i for i, g in enumerate(groups)}
    group_index = np.array([index[k] for k in keys], dtype=np.int64)
    tr.append(Sender.BOB, GroupAnnounce([g.group for g in groups], kept_idx, group_index))

    alice_bits = sides[kept_idx]
    bob_bits = dec.decision[kept_idx].astype(np.uint8)
    if len(kept_idx):
        result.empirical_ber_ab = float(np.mean(alice_bits != bob_bits))
        lm = log_region_mass(grid, k_lefts, model, cfg.exact_mass)
        rm = log_region_mass(grid, k_lefts + grid.separation, model, cfg.exact_mass)
        a0 = grid.left_center(k_lefts)
        pr = 1.0 / (1.0 + np.exp(lm - rm))
        _, right = posterior_pair_side((a0, a0 + grid.delta_a), key.c[kept_idx], (1.0 - pr, pr),
                                       eve_model)
        result.empirical_ber_ae = float(np.mean((right > 0.5) != alice_bits.astype(bool)))
        result.empirical_i_ab = _empirical_i_ab(alice_bits, dec.ber[kept_idx], group_index,
                                                len(groups), result.n_key)

    report = practical_key_rate(groups, result.n_key, model)
    result.report = report
    if report.non_positive:
        raise SessionAborted("non-positive practical key rate", result)

    # error correction, accounted as leakage per group
    leak_unit = np.array([ec_leakage(g, 1.0) for g in groups])
    for i, g in enumerate(groups):
        tr.append(Sender.BOB, SyndromeInfo(i, cfg.f_ec * leak_unit[i]))
    corrected = np.asarray(corrector(alice_bits, bob_bits, group_index, rng.child(4)),
                           dtype=np.uint8)
    digest_key = int(rng.child(5).integers(1, 2 ** 63))
    bob_digest = universal_digest(bob_bits, digest_key)
    tr.append(Sender.BOB, SyndromeInfo(ALL_GROUPS, float(DIGEST_BITS), bob_digest))
    result.leaked_bits = tr.leaked_bits()
    if universal_digest(corrected, digest_key) != bob_digest:
        raise SessionAborted("verification digest mismatch", result)

    result.secret_bits = (result.n_key * report.practical_rate
                          - (cfg.f_ec - 1.0) * float(leak_unit.sum()) - DIGEST_BITS)
    out_len = int(math.floor(max(result.secret_bits, 0.0) * cfg.safety_factor))
    out_len = min(out_len, len(bob_bits))
    pa_seed = int(rng.child(6).integers(0, 2 ** 63))
    tr.append(Sender.ALICE, PASeed(pa_seed, out_len))
    result.final_key_bob = privacy_amplify(bob_bits, out_len, pa_seed)
    result.final_key_alice = privacy_amplify(corrected, out_len, pa_seed)
    return result


def _empirical_i_ab(alice_bits, bers, group_index, n_groups, n_key) -> float:
    """Plug-in sum_G P(G) I_BG(A:B) from Alice's actual bits (diagnostic only)."""
    from .numerics import _clipped_entropy

    cnt = np.bincount(group_index, minlength=n_groups)
    ones = np.bincount(group_index, weights=alice_bits, minlength=n_groups)
    gam = np.bincount(group_index, weights=_clipped_entropy(bers), minlength=n_groups)
    ok = cnt > 0
    h_a = _clipped_entropy(ones[ok] / cnt[ok])
    return float(np.sum(cnt[ok] * h_a - gam[ok]) / n_key)


class ReplayMismatch(RuntimeError):
    pass


def replay_session(transcript_bytes: bytes, config: SessionConfig,
                   corrector: Corrector = ideal_corrector, stream_id: int = 0) -> SessionResult:
    """Re-run a session from its seed and check it reproduces the recorded transcript."""
    result = run_session(config, corrector, stream_id)
    if result.transcript.to_bytes() != transcript_bytes:
        raise ReplayMismatch("replayed transcript differs from the recorded one")
    return result


def write_key(path, bits) -> str:
    """Write the key bit-packed to ``path`` and its SHA-256 hex digest to ``path.sha256``."""
    import hashlib
    from pathlib import Path

    path = Path(path)
    data = np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()
    path.write_bytes(data)
    digest = hashlib.sha256(data).hexdigest()
    path.with_name(path.name + ".sha256").write_text(f"{digest}  {path.name}  {len(bits)} bits\n")
    return digest
