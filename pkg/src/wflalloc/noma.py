"""Joint power and bandwidth allocation for MC-NOMA rounds with flexible aggregation.

Maximising the weighted proportion of trained mini-batches is the same as
minimising ``sum_k T_u,k * beta_k`` when user weights follow the mini-batch
counts; in general each delay is weighted by the WGPTM a second of training
is worth to that user, and ``beta`` below stands for that weight. In the log domain

    A_i = log2(sum_{j<=i} g_j p_j + B_n),   A_0 = log2(B_n),

the upload delay of the i-th user of a subchannel is ``S / (B_n (A_i - A_{i-1}))``.
The strongest user always transmits at ``P_max``, and Cauchy's inequality
collapses the weaker users' terms into a single variable ``A_{K-1}``. Each
subchannel is then left with two unknowns, ``A_{K-1}`` and ``B_n``, and the
per-subchannel cost ``Z_n`` is jointly convex.

Internally the subchannel problem is parametrised by the headroom
``u = A_{K-1} - A_0`` instead of ``A_{K-1}`` itself; the two differ by the
constant ``log2(B_n)`` for fixed bandwidth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import (Assignment, RoundConfig, UserProfile, check_population,
                   subchannel_uplink_delays)
from .kernel import allocate_budget
from .metric import RoundMetrics, lptm_array, round_metrics, wgptm_per_second

#: Keeps the weak users' headroom strictly positive so ``z_2`` stays finite.
BRACKET_MARGIN = 1e-9
#: Smallest subchannel bandwidth, as a fraction of the equal share ``B/N``.
MIN_BANDWIDTH_FRACTION = 1e-3


@dataclass(frozen=True)
class SubstitutedVars:
    """Log-domain levels ``A_0..A_K`` of one subchannel and its common ratio ``Q_n``."""

    a_values: tuple[float, ...]
    q: Optional[float]


@dataclass(frozen=True)
class AllocationResult:
    scheme: str
    bandwidths_hz: tuple[float, ...]
    powers_w: tuple[tuple[float, ...], ...]
    metrics: RoundMetrics
    objective: float
    solver_status: str
    substituted: tuple[SubstitutedVars, ...] = ()
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "solver_status": self.solver_status,
            "objective": self.objective,
            "bandwidths_hz": list(self.bandwidths_hz),
            "powers_w": [list(p) for p in self.powers_w],
            "per_user_lptm": list(self.metrics.per_user_lptm),
            "per_user_minibatches": list(self.metrics.per_user_minibatches),
            "per_user_uplink_s": [t if math.isfinite(t) else None
                                  for t in self.metrics.per_user_uplink_s],
            "per_user_compute_s": list(self.metrics.per_user_compute_s),
            "substituted": [{"a_values": list(s.a_values), "q": s.q} for s in self.substituted],
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# Closed-form pieces


def power_from_a(gain_i, a_i, a_prev):
    """Transmit power that lifts the cumulative level from ``a_prev`` to ``a_i``."""
    if a_i < a_prev:
        raise ValueError("log-domain levels must be non-decreasing")
    if not gain_i > 0:
        raise ValueError("gain must be positive")
    return (2.0 ** a_i - 2.0 ** a_prev) / gain_i


def a_last(gain_strongest, max_power_w, a_prev):
    """Top level ``A_K`` when the strongest user transmits at ``max_power_w``."""
    return math.log2(gain_strongest * max_power_w + 2.0 ** a_prev)


def cauchy_bound_check(betas, a_values):
    """Both sides of the Cauchy lower bound on ``sum beta_i / (A_i - A_{i-1})``.

    ``a_values`` holds ``A_0..A_m`` for ``m = len(betas)``; ``lhs >= rhs`` always,
    with equality exactly when ``(A_i - A_{i-1}) / sqrt(beta_i)`` is constant.
    """
    a = np.asarray(a_values, dtype=float)
    betas = np.asarray(betas, dtype=float)
    steps = np.diff(a)
    if len(steps) != len(betas):
        raise ValueError("need one more level than weights")
    if np.any(steps <= 0):
        raise ValueError("levels must be strictly increasing")
    lhs = float(np.sum(betas / steps))
    rhs = float(np.sum(np.sqrt(betas)) ** 2 / (a[-1] - a[0]))
    return lhs, rhs


def recover_qn(a_star, b_star, betas_weak):
    """Common ratio of the weak users' level increments; ``None`` without weak users."""
    if len(betas_weak) == 0:
        return None
    a0 = math.log2(b_star)
    if a_star < a0:
        raise ValueError("A_{K-1} lies below A_0")
    return (a_star - a0) / math.fsum(math.sqrt(b) for b in betas_weak)


def recover_a_all(q_star, a0, betas_weak):
    """Levels ``A_1..A_{K-1}`` spaced in proportion to ``sqrt(beta_i)``."""
    if q_star < 0:
        raise ValueError("q_star must be non-negative")
    return list(a0 + q_star * np.cumsum(np.sqrt(np.asarray(betas_weak, dtype=float))))


def recover_powers(a_list_with_a0, gains, max_power_w):
    """Powers from levels ``A_0..A_{K-1}``, capped at ``max_power_w``; strongest at the cap.

    ``gains`` may list all ``K`` users or only the ``K-1`` weak ones. Returns
    ``(powers, clipped)``.
    """
    a = list(a_list_with_a0)
    weak = len(a) - 1
    if len(gains) not in (weak, weak + 1):
        raise ValueError("gains must cover the weak users (optionally plus the strongest)")
    powers, clipped = [], False
    for i in range(1, weak + 1):
        p = power_from_a(gains[i - 1], a[i], a[i - 1])
        if p > max_power_w:
            p, clipped = max_power_w, True
        powers.append(p)
    powers.append(max_power_w)
    return powers, clipped


# ---------------------------------------------------------------------------
# Per-subchannel cost


class Subchannel:
    """Data of one subchannel and its reduced cost ``Z_n``.

    ``gains`` and ``betas`` follow the ascending-gain order of the subchannel.
    """

    def __init__(self, gains, betas, config: RoundConfig):
        self.gains = np.asarray(gains, dtype=float)
        self.betas = np.asarray(betas, dtype=float)
        if self.gains.size == 0:
            raise ValueError("empty subchannel")
        self.size = self.gains.size
        self.payload = config.payload_bits
        self.p_max = config.max_power_w
        self.strong_gain = float(self.gains[-1])
        self.strong_beta = float(self.betas[-1])
        self.weak_beta = self.betas[:-1]
        self.cauchy = float(np.sum(np.sqrt(self.weak_beta))) ** 2
        self.weak_gain_sum = float(np.sum(self.gains[:-1]))

    def headroom_max(self, bandwidth):
        """Largest headroom, reached with every weak user at full power."""
        return math.log2(1.0 + self.weak_gain_sum * self.p_max / bandwidth)

    def cost(self, u, bandwidth):
        """``Z_n`` at headroom ``u``: the strongest user's term plus the Cauchy term."""
        x = self.strong_gain * self.p_max / (bandwidth * 2.0 ** u)
        strong = self.strong_beta / math.log2(1.0 + x)
        if self.size == 1:
            return self.payload * strong / bandwidth
        return self.payload * (strong + self.cauchy / u) / bandwidth

    def cost_slope(self, u, bandwidth):
        """``dZ_n/du`` (up to the positive factor ``S/B``); increasing in ``u``."""
        x = self.strong_gain * self.p_max / (bandwidth * 2.0 ** u)
        r = math.log2(1.0 + x)
        return self.strong_beta * x / ((1.0 + x) * r * r) - self.cauchy / (u * u)

    def best_headroom(self, bandwidth):
        """Minimiser of ``Z_n`` over the admissible headroom for a fixed bandwidth."""
        if self.size == 1:
            return 0.0
        hi = self.headroom_max(bandwidth)
        lo = BRACKET_MARGIN
        if hi <= lo:
            return hi
        if self.cost_slope(hi, bandwidth) <= 0:
            return hi
        return brentq(self.cost_slope, lo, hi, args=(bandwidth,), xtol=1e-13, rtol=1e-15)

    def reduced_cost(self, bandwidth):
        """``min_u Z_n(u, B)``, the convex decreasing cost the budget split works on."""
        return self.cost(self.best_headroom(bandwidth), bandwidth)


def delay_weights(users: Sequence[UserProfile], config: RoundConfig):
    """Per-user weight of upload delay in the objective."""
    return [wgptm_per_second(config, u) for u in users]


def _subchannel_data(assignment, gains, users, config):
    betas = delay_weights(users, config)
    return [Subchannel([gains[k] for k in sub], [betas[k] for k in sub], config)
            for sub in assignment.subchannels]


def zn_objective(a_last_minus_one, bandwidth_hz, gains, betas, config: RoundConfig):
    """Reduced weighted-delay cost ``Z_n(A_{K-1}, B_n)`` of one subchannel (s*FLOPS).

    ``gains``/``betas`` list the subchannel's users in ascending-gain order.
    For a single user ``a_last_minus_one`` is ignored (it equals ``A_0``).
    """
    sub = Subchannel(gains, betas, config)
    if sub.size == 1:
        return sub.cost(0.0, bandwidth_hz)
    u = a_last_minus_one - math.log2(bandwidth_hz)
    if not BRACKET_MARGIN <= u <= sub.headroom_max(bandwidth_hz) * (1 + 1e-12):
        raise ValueError("A_{K-1} outside its admissible bracket")
    return sub.cost(u, bandwidth_hz)


# ---------------------------------------------------------------------------
# Solvers


def min_bandwidth(config: RoundConfig):
    return MIN_BANDWIDTH_FRACTION * config.equal_bandwidth_hz


def solve_p5(assignment: Assignment, gains, users: Sequence[UserProfile], config: RoundConfig,
             bandwidths=None):
    """Optimal ``(A_{K-1}, B_n)`` per subchannel.

    The inner headroom problem is solved exactly for each bandwidth; the
    outer split of the bandwidth budget runs on the resulting reduced costs.
    Passing ``bandwidths`` fixes the split (equal-bandwidth variants).
    Single-user subchannels report ``A_{K-1} = A_0``.
    """
    subs = _subchannel_data(assignment, gains, users, config)
    if bandwidths is None:
        bandwidths = allocate_budget([s.reduced_cost for s in subs], config.total_bandwidth_hz,
                                     [min_bandwidth(config)] * len(subs))
    return [(math.log2(b) + s.best_headroom(b), float(b)) for s, b in zip(subs, bandwidths)]


def build_result(scheme, assignment, gains, users, config, bandwidths, powers,
                 clipped=False, common_lptm=None, details=None) -> AllocationResult:
    """Evaluate delays and metrics of a concrete power/bandwidth allocation."""
    uplink = [math.inf] * len(users)
    substituted = []
    weights = delay_weights(users, config)
    for sub, b, p in zip(assignment.subchannels, bandwidths, powers):
        g = [gains[k] for k in sub]
        for k, t in zip(sub, subchannel_uplink_delays(config.payload_bits, g, p, b)):
            uplink[k] = float(t)
        levels = np.log2(b + np.concatenate(([0.0], np.cumsum(np.multiply(g, p)))))
        weak_b = [weights[k] for k in sub[:-1]]
        q = recover_qn(levels[-2], b, weak_b) if len(sub) > 1 else None
        substituted.append(SubstitutedVars(tuple(float(a) for a in levels), q))
    if common_lptm == "min":
        common_lptm = max(0.0, float(np.min(lptm_array(config, users, uplink))))
    metrics = round_metrics(config, users, uplink, common_lptm=common_lptm)
    if any(t >= config.training_window_s for t in uplink):
        status = "infeasible"
    elif clipped:
        status = "clipped"
    else:
        status = "optimal"
    return AllocationResult(
        scheme=scheme,
        bandwidths_hz=tuple(float(b) for b in bandwidths),
        powers_w=tuple(tuple(float(x) for x in p) for p in powers),
        metrics=metrics,
        objective=metrics.wgptm,
        solver_status=status,
        substituted=tuple(substituted),
        details=details or {},
    )


def _powers_from_solution(assignment, gains, users, config, solution):
    powers, any_clipped = [], False
    weights = delay_weights(users, config)
    for sub, (a_star, b_star) in zip(assignment.subchannels, solution):
        if len(sub) == 1:
            powers.append([config.max_power_w])
            continue
        weak_b = [weights[k] for k in sub[:-1]]
        q = recover_qn(a_star, b_star, weak_b)
        a0 = math.log2(b_star)
        levels = [a0] + recover_a_all(q, a0, weak_b)
        p, clipped = recover_powers(levels, [gains[k] for k in sub], config.max_power_w)
        powers.append(p)
        any_clipped |= clipped
    return powers, any_clipped


def _allocate(scheme, assignment, gains, users, config, bandwidths=None):
    assignment.validate(gains)
    check_population(users)
    if assignment.num_subchannels != config.num_subchannels:
        raise ValueError("assignment and config disagree on the number of subchannels")
    solution = solve_p5(assignment, gains, users, config, bandwidths)
    powers, clipped = _powers_from_solution(assignment, gains, users, config, solution)
    return build_result(scheme, assignment, gains, users, config,
                        [b for _, b in solution], powers, clipped)


def allocate_joint(assignment: Assignment, gains, users: Sequence[UserProfile],
                   config: RoundConfig) -> AllocationResult:
    """Optimal powers and subchannel bandwidths for one round."""
    return _allocate("joint", assignment, gains, users, config)


def allocate_power_only(assignment: Assignment, gains, users: Sequence[UserProfile],
                        config: RoundConfig) -> AllocationResult:
    """Optimal powers with every subchannel fixed at ``B/N``."""
    equal = [config.equal_bandwidth_hz] * assignment.num_subchannels
    return _allocate("power_only", assignment, gains, users, config, equal)
