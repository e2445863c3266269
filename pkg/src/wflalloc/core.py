"""Physical-layer and computation delay primitives.

All channel quantities live in the noise-normalized domain: a user's gain is
``g = |h|^2 / N0`` (Hz/W), so the noise power on a subchannel of bandwidth
``B_n`` is simply ``B_n``. The rate equations only depend on ``|h|^2`` and
``N0`` through this ratio.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class InfeasibleDelayError(ArithmeticError):
    """Raised when a user cannot upload because its rate is zero."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class RoundConfig:
    """Round-level constants shared by every allocator.

    Attributes:
        total_bandwidth_hz: uplink bandwidth budget B.
        num_subchannels: number of subchannels N.
        round_duration_s: duration T of a round.
        downlink_delay_s: broadcast delay T_d, identical for all users.
        max_power_w: per-user transmit power cap.
        payload_bits: size S of an uploaded model.
        flops_per_minibatch: training cost of one mini-batch.
        gain_scale: calibration constant applied to dB gain draws.
    """

    total_bandwidth_hz: float = 30e6
    num_subchannels: int = 10
    round_duration_s: float = 10.0
    downlink_delay_s: float = 0.5
    max_power_w: float = dbm_to_watt(46.0)
    payload_bits: float = 4.84 * 8e6
    flops_per_minibatch: float = 0.04e9
    gain_scale: float = 1e6

    def __post_init__(self):
        for name in ("total_bandwidth_hz", "round_duration_s", "downlink_delay_s",
                     "max_power_w", "payload_bits", "flops_per_minibatch", "gain_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if int(self.num_subchannels) != self.num_subchannels or self.num_subchannels < 1:
            raise ValueError("num_subchannels must be a positive integer")
        if self.downlink_delay_s >= self.round_duration_s:
            raise ValueError("downlink_delay_s must be shorter than round_duration_s")

    @property
    def equal_bandwidth_hz(self) -> float:
        return self.total_bandwidth_hz / self.num_subchannels

    @property
    def training_window_s(self) -> float:
        """Time left for uploading and training once the broadcast is received."""
        return self.round_duration_s - self.downlink_delay_s


@dataclass(frozen=True)
class UserProfile:
    user_id: int
    minibatch_count: int
    weight: float
    flops_per_second: float
    normalized_gain: float

    def __post_init__(self):
        if self.minibatch_count < 1:
            raise ValueError("minibatch_count must be >= 1")
        if not 0 < self.weight <= 1:
            raise ValueError("weight must lie in (0, 1]")
        if not self.flops_per_second > 0:
            raise ValueError("flops_per_second must be positive")
        if not self.normalized_gain > 0:
            raise ValueError("normalized_gain must be positive")


def check_population(users: Sequence[UserProfile]) -> None:
    """Validate ids are 0..K-1 in order and that weights sum to one."""
    for idx, user in enumerate(users):
        if user.user_id != idx:
            raise ValueError(f"user at position {idx} has id {user.user_id}")
    total = math.fsum(u.weight for u in users)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"user weights sum to {total}, expected 1")


@dataclass(frozen=True)
class Assignment:
    """Users per subchannel, each list ordered by ascending normalized gain.

    The ordering is the SIC decoding order reversed: the last user of a
    subchannel is the strongest one and is decoded first.
    """

    subchannels: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "subchannels",
                           tuple(tuple(int(k) for k in sub) for sub in self.subchannels))

    @property
    def num_subchannels(self) -> int:
        return len(self.subchannels)

    @property
    def num_users(self) -> int:
        return sum(len(sub) for sub in self.subchannels)

    def validate(self, gains: Sequence[float]) -> None:
        seen = sorted(k for sub in self.subchannels for k in sub)
        if seen != list(range(len(gains))):
            raise ValueError("every user must appear in exactly one subchannel")
        for n, sub in enumerate(self.subchannels):
            if not sub:
                raise ValueError(f"subchannel {n} is empty")
            g = [gains[k] for k in sub]
            if any(b < a for a, b in zip(g, g[1:])):
                raise ValueError(f"subchannel {n} is not sorted by ascending gain")


def _check_index(gains, powers, bandwidth_hz, i):
    if len(gains) != len(powers):
        raise ValueError("gains and powers must have the same length")
    if not 1 <= i <= len(gains):
        raise IndexError(f"user index {i} outside 1..{len(gains)}")
    if not bandwidth_hz > 0:
        raise ValueError("subchannel bandwidth must be positive")


def sic_sinr(gains, powers, subchannel_bandwidth_hz, i):
    """SINR of the ``i``-th weakest user (1-based) after SIC.

    Stronger users are decoded and cancelled first, so only the users below
    ``i`` interfere.
    """
    _check_index(gains, powers, subchannel_bandwidth_hz, i)
    interference = math.fsum(g * p for g, p in zip(gains[:i - 1], powers[:i - 1]))
    return gains[i - 1] * powers[i - 1] / (interference + subchannel_bandwidth_hz)


def uplink_rate(gains, powers, subchannel_bandwidth_hz, i):
    """Shannon rate (bits/s) of the ``i``-th user of a subchannel."""
    sinr = sic_sinr(gains, powers, subchannel_bandwidth_hz, i)
    return subchannel_bandwidth_hz * math.log1p(sinr) / math.log(2.0)


def uplink_delay(payload_bits, gains, powers, subchannel_bandwidth_hz, i):
    """Time to upload ``payload_bits`` at the SIC rate of user ``i``."""
    rate = uplink_rate(gains, powers, subchannel_bandwidth_hz, i)
    if payload_bits == 0:
        return 0.0
    if rate <= 0:
        raise InfeasibleDelayError(f"user {i} has zero uplink rate")
    return payload_bits / rate


def subchannel_uplink_delays(payload_bits, gains, powers, subchannel_bandwidth_hz):
    """Upload delays of all users of one subchannel; ``inf`` for zero-rate users.

    Interference is the cumulative received power of the weaker users, so
    this matches :func:`uplink_rate` per user without the per-user loop.
    """
    if not subchannel_bandwidth_hz > 0:
        raise ValueError("subchannel bandwidth must be positive")
    received = np.asarray(gains, dtype=float) * np.asarray(powers, dtype=float)
    level = subchannel_bandwidth_hz + np.concatenate(([0.0], np.cumsum(received)))
    rates = subchannel_bandwidth_hz * np.log1p(received / level[:-1]) / np.log(2.0)
    with np.errstate(divide="ignore"):
        delays = np.where(rates > 0, payload_bits / np.where(rates > 0, rates, 1.0), np.inf)
    return delays


def compute_delay(minibatches_trained, flops_per_minibatch, flops_per_second):
    if not flops_per_second > 0:
        raise ValueError("flops_per_second must be positive")
    if minibatches_trained < 0 or flops_per_minibatch < 0:
        raise ValueError("mini-batch count and FLOPs must be non-negative")
    return minibatches_trained * flops_per_minibatch / flops_per_second


def total_delay(uplink_s, compute_s, downlink_s):
    return uplink_s + compute_s + downlink_s


def feasible_minibatches(round_duration_s, downlink_s, uplink_s, flops_per_second,
                         flops_per_minibatch):
    """Mini-batches that fit in the round once broadcast and upload are paid.

    Fractional values are allowed; the result is clamped at zero when the
    upload alone overruns the round.
    """
    spare = round_duration_s - downlink_s - uplink_s
    return max(0.0, spare * flops_per_second / flops_per_minibatch)
