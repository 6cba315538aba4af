"""Gaussian-modulated coherent states over a lossy, noisy channel.

All variances are carried in absolute units with ``shot_noise`` as the unit
(``N0 = 1`` by default), so ``modulation_variance`` and ``excess_noise`` are
dimensionless multipliers of ``N0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import RngStream, gaussian_pdf

DEFAULT_ATTENUATION_DB_KM = 0.2
DEFAULT_MODULATION_VARIANCE = 500.0


def transmission_from_distance(distance_km: float,
                               attenuation_db_per_km: float = DEFAULT_ATTENUATION_DB_KM) -> float:
    if distance_km < 0:
        raise ValueError("distance must be non-negative")
    if attenuation_db_per_km <= 0:
        raise ValueError("attenuation must be positive")
    return 10.0 ** (-attenuation_db_per_km * distance_km / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    transmission: float
    excess_noise: float = 0.0
    modulation_variance: float = DEFAULT_MODULATION_VARIANCE
    shot_noise: float = 1.0
    distance_km: float = 0.0
    attenuation_db_per_km: float = DEFAULT_ATTENUATION_DB_KM

    def __post_init__(self):
        if not 0.0 < self.transmission <= 1.0:
            raise ValueError(f"transmission must lie in (0, 1], got {self.transmission}")
        if self.excess_noise < 0:
            raise ValueError("excess noise must be non-negative")
        if self.modulation_variance < 0:
            raise ValueError("modulation variance must be non-negative")
        if self.shot_noise <= 0:
            raise ValueError("shot noise must be positive")

    @classmethod
    def from_distance(cls, distance_km: float, excess_noise: float = 0.0,
                      attenuation_db_per_km: float = DEFAULT_ATTENUATION_DB_KM, **kw):
        g = transmission_from_distance(distance_km, attenuation_db_per_km)
        return cls(transmission=g, excess_noise=excess_noise, distance_km=distance_km,
                   attenuation_db_per_km=attenuation_db_per_km, **kw)

    def with_estimate(self, transmission: float, excess_noise: float) -> "ChannelParams":
        return replace(self, transmission=transmission, excess_noise=max(excess_noise, 0.0))

    @property
    def loss_db(self) -> float:
        return -10.0 * math.log10(self.transmission)

    @property
    def alice_variance(self) -> float:
        return self.modulation_variance * self.shot_noise

    @property
    def bob_conditional_variance(self) -> float:
        """V_{B|A} = (1 + G xi) N0."""
        return (1.0 + self.transmission * self.excess_noise) * self.shot_noise

    @property
    def bob_variance(self) -> float:
        return self.transmission * self.alice_variance + self.bob_conditional_variance


@dataclass
class RawKeys:
    """Per-pulse raw key elements of the three parties (one effective quadrature each)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray | None = None
    basis: np.ndarray = field(default=None)  # 0 for x, 1 for p

    def __len__(self):
        return len(self.a)

    def subset(self, sl) -> "RawKeys":
        return RawKeys(self.a[sl], self.b[sl],
                       None if self.c is None else self.c[sl],
                       None if self.basis is None else self.basis[sl])


def sample_alice(params: ChannelParams, rng: RngStream, size=None):
    return math.sqrt(params.alice_variance) * rng.standard_normal(size)


def transmit(a, params: ChannelParams, rng: RngStream):
    a = np.asarray(a, dtype=float)
    noise = math.sqrt(params.bob_conditional_variance) * rng.standard_normal(a.shape)
    out = math.sqrt(params.transmission) * a + noise
    return float(out) if out.ndim == 0 else out


def likelihood_b_given_a(b, a, params: ChannelParams):
    return gaussian_pdf(b, math.sqrt(params.transmission) * np.asarray(a, dtype=float),
                        params.bob_conditional_variance)


def posterior_a_given_b(b, params: ChannelParams):
    """Closed-form Gaussian posterior of Alice's element given Bob's: (mean, variance)."""
    g, va, vba = params.transmission, params.alice_variance, params.bob_conditional_variance
    denom = g * va + vba
    mean = math.sqrt(g) * va * np.asarray(b, dtype=float) / denom
    return mean, va * vba / denom
