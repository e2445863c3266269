"""Comparison allocators: full power, MC-OMA/TDMA and the synchronous-FL family."""
from __future__ import annotations

import math
from itertools import permutations
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .core import Assignment, RoundConfig, UserProfile, check_population
from .kernel import equalize_budget
from .metric import lptm_array, round_metrics, wgptm_per_second
from .noma import (AllocationResult, allocate_joint, allocate_power_only, build_result,
                   min_bandwidth, power_from_a)

#: Largest subchannel for which OMA slot orders are enumerated exhaustively.
MAX_ENUMERATION = 9


class EnumerationLimitError(ValueError):
    pass


def _prepare(assignment, gains, users, config):
    assignment.validate(gains)
    check_population(users)
    if assignment.num_subchannels != config.num_subchannels:
        raise ValueError("assignment and config disagree on the number of subchannels")


def allocate_full_power(assignment: Assignment, gains, users: Sequence[UserProfile],
                        config: RoundConfig, scheme="full_power", common_lptm=None):
    """Every user at ``P_max`` on equal-bandwidth subchannels."""
    _prepare(assignment, gains, users, config)
    bandwidths = [config.equal_bandwidth_hz] * assignment.num_subchannels
    powers = [[config.max_power_w] * len(sub) for sub in assignment.subchannels]
    return build_result(scheme, assignment, gains, users, config, bandwidths, powers,
                        common_lptm=common_lptm)


# ---------------------------------------------------------------------------
# MC-OMA / TDMA


def oma_slot_durations(gains, bandwidth_hz, config: RoundConfig):
    """Interference-free upload time of each user at full power; independent of order."""
    g = np.asarray(gains, dtype=float)
    rate = bandwidth_hz * np.log2(1.0 + g * config.max_power_w / bandwidth_hz)
    return config.payload_bits / rate


def oma_tails(durations, order):
    """Time from each user's slot start to the end of the round, slots packed to end at T.

    Returned in the same indexing as ``durations``.
    """
    d = np.asarray(durations, dtype=float)
    tail = np.cumsum(d[list(order)][::-1])[::-1]
    out = np.empty_like(d)
    out[list(order)] = tail
    return out


def _order_scores(durations, weights, window, perms):
    d = durations[perms]
    tails = np.cumsum(d[:, ::-1], axis=1)[:, ::-1]
    lptm = (window - tails) * weights[perms]
    flexible = np.sum(np.maximum(lptm, 0.0), axis=1)
    return flexible, lptm.min(axis=1)


def best_oma_order(durations, weights, window, objective="sum", allow_heuristic=False):
    """Slot order of one subchannel.

    ``weights[k]`` converts training seconds of user ``k`` into the score:
    ``e_k beta_k / (alpha |M_k|)`` for ``objective="sum"`` (the WGPTM) and
    ``beta_k / (alpha |M_k|)`` for ``"min"``, which maximises the smallest
    LPTM with ties broken by the plain sum. Orders are
    enumerated for up to :data:`MAX_ENUMERATION` users; larger subchannels
    need ``allow_heuristic`` and fall back to a ratio rule.
    """
    d = np.asarray(durations, dtype=float)
    w = np.asarray(weights, dtype=float)
    m = len(d)
    if m > MAX_ENUMERATION:
        if not allow_heuristic:
            raise EnumerationLimitError(
                f"{m} users exceed the enumeration limit of {MAX_ENUMERATION}; "
                "pass allow_heuristic=True to use the ratio-rule order")
        return _heuristic_order(d, w, window, objective)
    perms = np.array(list(permutations(range(m))), dtype=int)
    flexible, worst = _order_scores(d, w, window, perms)
    if objective == "sum":
        best = int(np.argmax(flexible))
    elif objective == "min":
        top = worst >= worst.max() - 1e-12 * max(1.0, abs(worst.max()))
        best = int(np.flatnonzero(top)[np.argmax(flexible[top])])
    else:
        raise ValueError(f"unknown objective {objective!r}")
    return tuple(int(k) for k in perms[best])


def _heuristic_order(d, w, window, objective):
    if objective == "sum":
        # Smith's ratio rule on the reversed schedule: the largest weight per
        # second of slot goes last.
        return tuple(int(k) for k in np.lexsort((np.arange(len(d)), w / d)))
    # Lawler's rule: fill slots from the front, each time giving the earliest
    # free slot to the user that loses least from it.
    remaining = list(range(len(d)))
    order = []
    tail = float(d.sum())
    while remaining:
        k = max(remaining, key=lambda j: ((window - tail) * w[j], -j))
        order.append(k)
        remaining.remove(k)
        tail -= d[k]
    return tuple(order)


def _oma(assignment, gains, users, config, objective, allow_heuristic):
    _prepare(assignment, gains, users, config)
    b = config.equal_bandwidth_hz
    window = config.training_window_s
    tails = [math.inf] * len(users)
    orders, slots = [], []
    for sub in assignment.subchannels:
        d = oma_slot_durations([gains[k] for k in sub], b, config)
        if objective == "sum":
            w = np.array([wgptm_per_second(config, users[k]) for k in sub])
        else:
            w = np.array([users[k].flops_per_second
                          / (config.flops_per_minibatch * users[k].minibatch_count) for k in sub])
        order = best_oma_order(d, w, window, objective, allow_heuristic)
        for k, t in zip(sub, oma_tails(d, order)):
            tails[k] = float(t)
        orders.append([sub[i] for i in order])
        slots.append([float(x) for x in d])
    return tails, orders, slots


def _oma_result(scheme, assignment, gains, users, config, objective, allow_heuristic):
    tails, orders, slots = _oma(assignment, gains, users, config, objective, allow_heuristic)
    common = None
    if objective == "min":
        common = max(0.0, float(np.min(lptm_array(config, users, tails))))
    metrics = round_metrics(config, users, tails, common_lptm=common)
    status = "infeasible" if any(t >= config.training_window_s for t in tails) else "optimal"
    return AllocationResult(
        scheme=scheme,
        bandwidths_hz=tuple([config.equal_bandwidth_hz] * assignment.num_subchannels),
        powers_w=tuple(tuple([config.max_power_w] * len(s)) for s in assignment.subchannels),
        metrics=metrics,
        objective=metrics.wgptm,
        solver_status=status,
        details={"slot_order": orders, "slot_durations_s": slots},
    )


def allocate_oma_flexible(assignment: Assignment, gains, users: Sequence[UserProfile],
                          config: RoundConfig, allow_heuristic=False) -> AllocationResult:
    """TDMA within equal-bandwidth subchannels, slot order chosen for the weighted LPTM.

    Slots are packed back to back so the last one ends at ``T``; a user trains
    from the broadcast until its slot starts. ``per_user_uplink_s`` therefore
    holds the time from slot start to the end of the round.
    """
    return _oma_result("oma", assignment, gains, users, config, "sum", allow_heuristic)


def allocate_sync_oma(assignment: Assignment, gains, users: Sequence[UserProfile],
                      config: RoundConfig, allow_heuristic=False) -> AllocationResult:
    """TDMA with per-subchannel max-min slot orders; every user trains the global minimum LPTM."""
    return _oma_result("sync_oma", assignment, gains, users, config, "min", allow_heuristic)


# ---------------------------------------------------------------------------
# Synchronous aggregation


class SyncSubchannel:
    """Min-max upload cost ``T_u,k beta_k / (alpha |M_k|)`` of one subchannel.

    At the optimum every user of the subchannel has the same cost ``Q'_n``.
    With ``c_k = S beta_k / (alpha |M_k|)`` this fixes the level increments to
    ``A_i - A_{i-1} = c_i / (B_n Q'_n)``; the strongest user at ``P_max`` then
    pins the weak users' total headroom ``u``.
    """

    def __init__(self, gains, costs, config: RoundConfig):
        self.gains = np.asarray(gains, dtype=float)
        self.costs = np.asarray(costs, dtype=float)
        self.p_max = config.max_power_w
        self.size = self.gains.size
        self.weak_cost = float(np.sum(self.costs[:-1]))
        self.weak_gain_sum = float(np.sum(self.gains[:-1]))

    def headroom(self, bandwidth):
        """Weak users' headroom at the equalised optimum and whether the power cap binds."""
        if self.size == 1:
            return 0.0, False
        strong = self.gains[-1] * self.p_max / bandwidth
        ratio = self.costs[-1] / self.weak_cost

        def gap(u):
            return math.log2(1.0 + strong / 2.0 ** u) - ratio * u

        hi = math.log2(1.0 + self.weak_gain_sum * self.p_max / bandwidth)
        if gap(hi) > 0:
            return hi, True
        return brentq(gap, 1e-12, hi, xtol=1e-14, rtol=1e-15), False

    def level(self, bandwidth):
        u, capped = self.headroom(bandwidth)
        if self.size == 1:
            rate_term = math.log2(1.0 + self.gains[0] * self.p_max / bandwidth)
            return self.costs[0] / (bandwidth * rate_term)
        return self.weak_cost / (bandwidth * u)

    def powers(self, bandwidth):
        u, capped = self.headroom(bandwidth)
        if self.size == 1:
            return [self.p_max], False
        a0 = math.log2(bandwidth)
        levels = a0 + u * np.concatenate(([0.0], np.cumsum(self.costs[:-1]))) / self.weak_cost
        powers = []
        for i in range(1, self.size):
            p = power_from_a(self.gains[i - 1], levels[i], levels[i - 1])
            if p > self.p_max * (1 + 1e-12):
                p, capped = self.p_max, True
            powers.append(min(p, self.p_max))
        powers.append(self.p_max)
        return powers, capped


def _sync_subchannels(assignment, gains, users, config):
    costs = [config.payload_bits * u.flops_per_second
             / (config.flops_per_minibatch * u.minibatch_count) for u in users]
    return [SyncSubchannel([gains[k] for k in sub], [costs[k] for k in sub], config)
            for sub in assignment.subchannels]


def _sync_allocate(scheme, assignment, gains, users, config, bandwidths=None):
    _prepare(assignment, gains, users, config)
    subs = _sync_subchannels(assignment, gains, users, config)
    if bandwidths is None:
        bandwidths = equalize_budget([s.level for s in subs], config.total_bandwidth_hz,
                                     [min_bandwidth(config)] * len(subs))
    powers, clipped = [], False
    for s, b in zip(subs, bandwidths):
        p, capped = s.powers(b)
        powers.append(p)
        clipped |= capped
    levels = [s.level(b) for s, b in zip(subs, bandwidths)]
    return build_result(scheme, assignment, gains, users, config, bandwidths, powers, clipped,
                        common_lptm="min", details={"subchannel_levels": levels})


def allocate_sync_joint(assignment: Assignment, gains, users: Sequence[UserProfile],
                        config: RoundConfig) -> AllocationResult:
    """Max-min allocation: equal upload cost inside each subchannel, equal levels across them."""
    return _sync_allocate("sync_joint", assignment, gains, users, config)


def allocate_sync_power_only(assignment: Assignment, gains, users: Sequence[UserProfile],
                             config: RoundConfig) -> AllocationResult:
    equal = [config.equal_bandwidth_hz] * assignment.num_subchannels
    return _sync_allocate("sync_power_only", assignment, gains, users, config, equal)


def allocate_sync_full_power(assignment: Assignment, gains, users: Sequence[UserProfile],
                             config: RoundConfig) -> AllocationResult:
    return allocate_full_power(assignment, gains, users, config, scheme="sync_full_power",
                               common_lptm="min")


SCHEMES = {
    "joint": allocate_joint,
    "power_only": allocate_power_only,
    "full_power": allocate_full_power,
    "oma": allocate_oma_flexible,
    "sync_joint": allocate_sync_joint,
    "sync_power_only": allocate_sync_power_only,
    "sync_full_power": allocate_sync_full_power,
    "sync_oma": allocate_sync_oma,
}

#: Flexible scheme paired with its synchronous counterpart.
SYNC_PAIRS = {
    "joint": "sync_joint",
    "power_only": "sync_power_only",
    "full_power": "sync_full_power",
    "oma": "sync_oma",
}
