"""
Inside one NOMA subchannel
==========================

The allocator works with log-domain levels A_i = log2(sum_{j<=i} g_j p_j + B).
For a fixed bandwidth only the weak users' total headroom u = A_{K-1} - A_0
is free: the strongest user always transmits at full power, and the weak
users split u in proportion to the square roots of their delay weights.
"""

import math

import numpy as np

from wflalloc import RoundConfig
from wflalloc.noma import (Subchannel, cauchy_bound_check, power_from_a, recover_a_all,
                           recover_qn, zn_objective)

config = RoundConfig()
gains = np.array([2e6, 5e6, 9e6, 2e7])
weights = np.array([7e9, 8e9, 6e9, 9e9])
bandwidth = 3e6

sub = Subchannel(gains, weights, config)
print(f"headroom available to the weak users: {sub.headroom_max(bandwidth):.3f} bits")

# weighted upload delay as a function of the headroom: convex, with an interior minimum
for u in np.linspace(0.25, sub.headroom_max(bandwidth) - 0.05, 8):
    print(f"u = {u:5.2f}  cost = {sub.cost(u, bandwidth):.4e}")
best = sub.best_headroom(bandwidth)
print(f"optimal headroom {best:.4f}")

# recover the levels and powers from the optimum
a0 = math.log2(bandwidth)
q = recover_qn(a0 + best, bandwidth, weights[:-1])
levels = [a0] + recover_a_all(q, a0, weights[:-1])
powers = [power_from_a(g, hi, lo) for g, hi, lo in zip(gains, levels[1:], levels[:-1])]
print("weak-user powers (W):", np.round(powers, 3), "strongest:", round(config.max_power_w, 3))

# the split meets the Cauchy bound with equality
lhs, rhs = cauchy_bound_check(weights[:-1], levels)
print(f"sum w_i/(A_i - A_i-1) = {lhs:.6e}, bound = {rhs:.6e}")
print("reduced objective:", zn_objective(a0 + best, bandwidth, gains, weights, config))
