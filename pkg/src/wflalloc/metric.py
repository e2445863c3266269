"""Per-round training-progress metrics (LPTM and WGPTM)."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import RoundConfig, UserProfile, compute_delay, feasible_minibatches


@dataclass(frozen=True)
class RoundMetrics:
    """Outcome of one round; per-user lists are indexed by ``user_id``."""

    per_user_lptm: tuple[float, ...]
    wgptm: float
    per_user_minibatches: tuple[float, ...]
    per_user_uplink_s: tuple[float, ...]
    per_user_compute_s: tuple[float, ...]


def lptm(minibatches_trained, minibatch_count):
    """Fraction of the local mini-batch set trained in a round (may exceed 1)."""
    if minibatch_count < 1:
        raise ValueError("minibatch_count must be >= 1")
    return minibatches_trained / minibatch_count


def wgptm(weights, lptms):
    if len(weights) != len(lptms):
        raise ValueError("weights and LPTMs differ in length")
    return math.fsum(e * phi for e, phi in zip(weights, lptms))


def wgptm_per_second(config: RoundConfig, user: UserProfile):
    """WGPTM one second of local training adds: ``e_k beta_k / (alpha |M_k|)``.

    With ``e_k`` proportional to ``|M_k|`` this is ``beta_k`` times a constant
    shared by all users, which is why the allocators can weight delays by it.
    """
    return user.weight * user.flops_per_second / (config.flops_per_minibatch * user.minibatch_count)


def wgptm_from_delays(config: RoundConfig, users: Sequence[UserProfile], per_user_uplink_s):
    """WGPTM written directly in terms of the upload delays.

    A user whose upload does not leave any training time contributes zero
    rather than a negative amount.
    """
    if len(users) != len(per_user_uplink_s):
        raise ValueError("one uplink delay per user is required")
    window = config.training_window_s
    return math.fsum(max(0.0, window - t_u) * wgptm_per_second(config, u)
                     for u, t_u in zip(users, per_user_uplink_s))


def round_metrics(config: RoundConfig, users: Sequence[UserProfile], per_user_uplink_s,
                  common_lptm=None) -> RoundMetrics:
    """Assemble :class:`RoundMetrics` from upload delays.

    With ``common_lptm`` every user trains the same LPTM (synchronous
    aggregation); otherwise each user fills its own spare time.
    """
    uplink = [float(t) for t in per_user_uplink_s]
    if common_lptm is None:
        phis = [feasible_minibatches(config.round_duration_s, config.downlink_delay_s, t_u,
                                     u.flops_per_second, config.flops_per_minibatch)
                for u, t_u in zip(users, uplink)]
    else:
        phis = [max(0.0, common_lptm) * u.minibatch_count for u in users]
    lptms = [lptm(phi, u.minibatch_count) for phi, u in zip(phis, users)]
    compute = [compute_delay(phi, config.flops_per_minibatch, u.flops_per_second)
               for phi, u in zip(phis, users)]
    return RoundMetrics(
        per_user_lptm=tuple(lptms),
        wgptm=wgptm([u.weight for u in users], lptms),
        per_user_minibatches=tuple(phis),
        per_user_uplink_s=tuple(uplink),
        per_user_compute_s=tuple(compute),
    )


def lptm_array(config: RoundConfig, users: Sequence[UserProfile], per_user_uplink_s):
    """Unclamped LPTMs, used to set the common LPTM of synchronous schemes."""
    beta = np.array([u.flops_per_second for u in users])
    count = np.array([u.minibatch_count for u in users], dtype=float)
    spare = config.training_window_s - np.asarray(per_user_uplink_s, dtype=float)
    return spare * beta / (config.flops_per_minibatch * count)
