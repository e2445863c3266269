"""
One round, every scheme
=======================

Draw one realization of the default scenario (25 users, 10 subchannels,
10 s rounds) and solve it with each allocator. The printed table is the
per-instance version of the comparison the Monte-Carlo sweeps average.
"""

from wflalloc import SCHEMES
from wflalloc.harness import Scenario, assign, generate_realization

scenario = Scenario(seed=7)
users, gains = generate_realization(scenario, trial_index=0)
assignment = assign(scenario, gains, trial_index=0)

# users sharing a subchannel, weakest first (SIC decodes the strongest first)
for n, sub in enumerate(assignment.subchannels):
    print(f"subchannel {n}: users {list(sub)}")

print(f"\n{'scheme':>16} {'WGPTM':>8}  status")
for name, allocate in SCHEMES.items():
    result = allocate(assignment, gains, users, scenario.config)
    print(f"{name:>16} {result.objective:8.3f}  {result.solver_status}")

# The joint allocator spends more bandwidth on crowded or weak subchannels.
joint = SCHEMES["joint"](assignment, gains, users, scenario.config)
print("\njoint bandwidths (MHz):", [round(b / 1e6, 3) for b in joint.bandwidths_hz])
print("joint powers of subchannel 0 (W):", [round(p, 3) for p in joint.powers_w[0]])
