"""Brute-force reference solutions and the quick self-check battery behind ``selftest``."""
from __future__ import annotations

import math
import sys

import numpy as np

from .baselines import SCHEMES, SYNC_PAIRS, allocate_sync_joint
from .core import RoundConfig, subchannel_uplink_delays
from .metric import wgptm_per_second
from .noma import allocate_joint, delay_weights


def _subchannel_value(config, users, sub, gains, bandwidth, weak_powers):
    """WGPTM contributed by a two-user (or single-user) subchannel, vectorised over weak powers."""
    window = config.training_window_s
    strong = sub[-1]
    value_strong = wgptm_per_second(config, users[strong])
    g_strong = gains[strong]
    if len(sub) == 1:
        t = subchannel_uplink_delays(config.payload_bits, [g_strong], [config.max_power_w],
                                     bandwidth)[0]
        return np.full_like(weak_powers, max(0.0, window - t) * value_strong)
    weak = sub[0]
    s = config.payload_bits
    rate_weak = bandwidth * np.log2(1.0 + gains[weak] * weak_powers / bandwidth)
    t_weak = np.where(rate_weak > 0, s / np.where(rate_weak > 0, rate_weak, 1.0), np.inf)
    rate_strong = bandwidth * np.log2(1.0 + g_strong * config.max_power_w
                                      / (gains[weak] * weak_powers + bandwidth))
    t_strong = s / rate_strong
    return (np.maximum(0.0, window - t_weak) * wgptm_per_second(config, users[weak])
            + np.maximum(0.0, window - t_strong) * value_strong)


def grid_oracle(assignment, gains, users, config, points=60):
    """Grid optimum of WGPTM over bandwidth split and weak-user levels.

    Supports two subchannels of at most two users each. The bandwidth of the
    first subchannel and each weak user's log-domain level get ``points``
    values; the strongest user of a subchannel always transmits at ``P_max``.
    Returns ``(wgptm, bandwidths, weak_powers)``.
    """
    subs = assignment.subchannels
    if len(subs) != 2 or any(len(s) > 2 for s in subs):
        raise ValueError("grid oracle handles two subchannels with at most two users")
    total = config.total_bandwidth_hz
    best = (-math.inf, None, None)
    for b1 in np.linspace(total / (2 * points), total * (1 - 1 / (2 * points)), points):
        value, chosen = 0.0, []
        for sub, b in zip(subs, (b1, total - b1)):
            if len(sub) == 1:
                value += float(_subchannel_value(config, users, sub, gains, b, np.zeros(1))[0])
                chosen.append(None)
                continue
            g_weak = gains[sub[0]]
            a0 = math.log2(b)
            levels = np.linspace(a0, math.log2(b + g_weak * config.max_power_w), points + 1)[1:]
            powers = (2.0 ** levels - b) / g_weak
            vals = _subchannel_value(config, users, sub, gains, b, powers)
            i = int(np.argmax(vals))
            value += float(vals[i])
            chosen.append(float(powers[i]))
        if value > best[0]:
            best = (value, (float(b1), float(total - b1)), tuple(chosen))
    return best


def cauchy_ratio_spread(result, assignment, users, config):
    """Largest relative spread of ``(A_i - A_{i-1}) / sqrt(weight_i)`` over weak users."""
    weights = delay_weights(users, config)
    worst = 0.0
    for sub, sv in zip(assignment.subchannels, result.substituted):
        if len(sub) < 3:
            continue
        steps = np.diff(sv.a_values)[:-1]
        ratios = steps / np.sqrt([weights[k] for k in sub[:-1]])
        worst = max(worst, float(ratios.max() / ratios.min() - 1.0))
    return worst


def sync_cost_spread(result, assignment, users, config):
    """Relative spreads of ``T_u,k beta_k / (alpha |M_k|)`` within and across subchannels."""
    within, levels = 0.0, []
    for sub in assignment.subchannels:
        costs = np.array([result.metrics.per_user_uplink_s[k] * users[k].flops_per_second
                          / (config.flops_per_minibatch * users[k].minibatch_count) for k in sub])
        within = max(within, float(costs.max() / costs.min() - 1.0))
        levels.append(costs.mean())
    levels = np.array(levels)
    return within, float(levels.max() / levels.min() - 1.0)


def run_selftest(trials=50, out=sys.stdout):
    """Fast battery of oracle and property checks; returns True when all pass."""
    from .harness import Scenario, assign, generate_realization, run_trials

    checks = []

    small = Scenario(config=RoundConfig(num_subchannels=2), num_users=4, num_trials=trials)
    worst = 0.0
    for t in range(min(trials, 10)):
        users, gains = generate_realization(small, t)
        a = assign(small, gains, t)
        ref = grid_oracle(a, gains, users, small.config)[0]
        got = allocate_joint(a, gains, users, small.config).objective
        worst = max(worst, (ref - got) / ref)
    checks.append(("grid oracle (N=2, K=4)", worst <= 1e-3, f"worst shortfall {worst:.2e}"))

    cauchy = Scenario(config=RoundConfig(num_subchannels=2), num_users=8, num_trials=trials)
    worst, clipped = 0.0, 0
    for t in range(min(trials, 20)):
        users, gains = generate_realization(cauchy, t)
        a = assign(cauchy, gains, t)
        res = allocate_joint(a, gains, users, cauchy.config)
        if res.solver_status != "optimal":
            clipped += 1
            continue
        worst = max(worst, cauchy_ratio_spread(res, a, users, cauchy.config))
    checks.append(("Cauchy equality", worst <= 1e-6, f"worst spread {worst:.2e}, {clipped} skipped"))

    default = Scenario(num_trials=trials)
    violations = 0
    for _, res, err in run_trials(default, tuple(SCHEMES)):
        if res is None:
            continue
        chain = [("joint", "power_only"), ("power_only", "full_power")] + list(SYNC_PAIRS.items())
        for hi, lo in chain:
            if res[lo][0] > res[hi][0] * (1 + 1e-9) + 1e-12:
                violations += 1
    checks.append(("scheme dominance", violations == 0, f"{violations} violations over {trials} trials"))

    within = across = 0.0
    for t in range(min(trials, 20)):
        users, gains = generate_realization(default, t)
        a = assign(default, gains, t)
        res = allocate_sync_joint(a, gains, users, default.config)
        if res.solver_status != "optimal":
            continue
        w, c = sync_cost_spread(res, a, users, default.config)
        within, across = max(within, w), max(across, c)
    checks.append(("sync equalization", within <= 1e-6 and across <= 1e-5,
                   f"within {within:.2e}, across {across:.2e}"))

    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}", file=out)
    return all(ok for _, ok, _ in checks)
