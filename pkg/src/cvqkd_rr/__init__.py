"""Single-bit reverse-reconciliation CVQKD simulator."""

from .channel import ChannelParams, RawKeys, sample_alice, transmit, transmission_from_distance
from .decoder import GroupId, GroupingPolicy, decode_batch, posterior_bits
from .eve import EveParams, eve_group_info, eve_noise_variance, eve_params
from .keyrate import (KeyRateReport, analytic_report, cascade_ber, efficiency, markov_rate,
                      practical_key_rate, theoretical_rate, xi_threshold)
from .numerics import RngStream, binary_entropy, integrate_adaptive
from .pairing import BlockPairing, DeltaARule, PairingGrid, build_grid
from .session import SessionAborted, SessionConfig, SessionResult, run_session
from .sweep import SweepConfig, emit_outputs, run_sweep
from .transcript import Transcript

__all__ = [
    "ChannelParams", "RawKeys", "sample_alice", "transmit", "transmission_from_distance",
    "GroupId", "GroupingPolicy", "decode_batch", "posterior_bits",
    "EveParams", "eve_group_info", "eve_noise_variance", "eve_params",
    "KeyRateReport", "analytic_report", "cascade_ber", "efficiency", "markov_rate",
    "practical_key_rate", "theoretical_rate", "xi_threshold",
    "RngStream", "binary_entropy", "integrate_adaptive",
    "BlockPairing", "DeltaARule", "PairingGrid", "build_grid",
    "SessionAborted", "SessionConfig", "SessionResult", "run_session",
    "SweepConfig", "emit_outputs", "run_sweep", "Transcript",
]
