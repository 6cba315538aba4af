"""Slicing Alice's key-element axis into regions, pairing them, and assigning her bit."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Protocol

import numpy as np

from .channel import ChannelParams
from .numerics import gaussian_log_interval_mass, gaussian_logpdf


class Side(IntEnum):
    LEFT = 0
    RIGHT = 1


class GridWarning(UserWarning):
    """Region width is not small against the estimation noise of Eve or Bob."""


class GridError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class PairLabel:
    left: int
    right: int

    def __str__(self):
        return f"{self.left}:{self.right}"

    @classmethod
    def parse(cls, text: str) -> "PairLabel":
        left, right = text.split(":")
        return cls(int(left), int(right))


class PairingScheme(Protocol):
    """Perfect matching of region indices at a fixed index separation."""

    separation: int

    def left_of(self, i: np.ndarray) -> np.ndarray: ...

    def side_of(self, i: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class BlockPairing:
    """Blocks of ``2m`` regions: the first ``m`` pair with the next ``m``.

    With ``m = 7``: 0-7, 1-8, ..., 6-13, then 14-21 and so on; negative indices
    follow the same rule through a non-negative modulus.
    """

    separation: int = 7

    def side_of(self, i):
        return (np.mod(i, 2 * self.separation) >= self.separation).astype(np.int8)

    def left_of(self, i):
        i = np.asarray(i, dtype=np.int64)
        return i - self.separation * self.side_of(i)


@dataclass(frozen=True)
class DeltaARule:
    """Pair separation ``delta_a = (base + slope * L) * sqrt(N_E)``."""

    base: float = 1.0
    slope_per_km: float = 0.02

    def __call__(self, distance_km: float, eve_noise: float) -> float:
        return (self.base + self.slope_per_km * distance_km) * math.sqrt(eve_noise)


@dataclass(frozen=True)
class PairingGrid:
    delta_a: float
    width: float
    scheme: BlockPairing = field(default_factory=BlockPairing)

    def __post_init__(self):
        if self.delta_a <= 0 or self.width <= 0:
            raise GridError("delta_a and width must be positive")
        if abs(self.delta_a - self.scheme.separation * self.width) > 1e-12 * self.delta_a:
            raise GridError("delta_a must equal separation * width")

    @property
    def separation(self) -> int:
        return self.scheme.separation

    def left_center(self, left):
        return (np.asarray(left, dtype=float) + 0.5) * self.width

    def region_bounds(self, i):
        i = np.asarray(i, dtype=float)
        return i * self.width, (i + 1.0) * self.width


def build_grid(params: ChannelParams, eve_noise: float,
               rule: DeltaARule = DeltaARule(), separation: int = 7,
               strict: bool = False) -> PairingGrid:
    """Grid with ``delta_a`` from ``rule`` and region width ``delta_a / separation``.

    The region width should be well below the spread of Eve's and Bob's
    estimates of Alice's element (``sqrt(N_E)`` and ``sqrt(V_B|A / G)``). A width
    above a third of that spread warns, or raises when ``strict``.
    """
    if eve_noise <= 0 or not math.isfinite(eve_noise):
        raise GridError("eve noise variance must be positive and finite")
    delta_a = rule(params.distance_km, eve_noise)
    width = delta_a / separation
    bound = min(math.sqrt(eve_noise),
                math.sqrt(params.bob_conditional_variance / params.transmission)) / 3.0
    if width > bound:
        msg = f"region width {width:.4g} exceeds smallness bound {bound:.4g}"
        if strict:
            raise GridError(msg)
        warnings.warn(msg, GridWarning, stacklevel=2)
    return PairingGrid(delta_a=delta_a, width=width, scheme=BlockPairing(separation))


def region_of(grid: PairingGrid, a):
    out = np.floor(np.asarray(a, dtype=float) / grid.width).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def pair_of(grid: PairingGrid, i: int) -> tuple[PairLabel, Side]:
    left = int(grid.scheme.left_of(i))
    side = Side(int(grid.scheme.side_of(i)))
    return PairLabel(left, left + grid.separation), side


def alice_bit(side) -> int:
    return int(side)


def pair_centers(grid: PairingGrid, pair: PairLabel) -> tuple[float, float]:
    a0 = (pair.left + 0.5) * grid.width
    return a0, a0 + grid.delta_a


def log_region_mass(grid: PairingGrid, i, params: ChannelParams, exact: bool = True):
    """log of the prior mass of region ``i`` under Alice's modulation."""
    lo, hi = grid.region_bounds(i)
    if exact:
        return gaussian_log_interval_mass(lo, hi, 0.0, params.alice_variance)
    return gaussian_logpdf(0.5 * (lo + hi), 0.0, params.alice_variance) + math.log(grid.width)


def relevant_lefts(grid: PairingGrid, params: ChannelParams, n_sigma: float = 8.5) -> np.ndarray:
    """Left indices of every pair with non-negligible prior mass."""
    span = n_sigma * math.sqrt(params.alice_variance)
    lo = int(math.floor(-span / grid.width)) - 2 * grid.separation
    hi = int(math.ceil(span / grid.width))
    idx = np.arange(lo, hi + 1)
    return idx[grid.scheme.side_of(idx) == 0]
