"""
Does a higher WGPTM train faster?
=================================

Run a small ridge-regression federation under several allocators. Every round
redraws the channel, solves the allocation and lets each user train the whole
number of mini-batches its allocation affords. Rounds with a larger WGPTM
should shrink the global loss more.
"""

import numpy as np

from wflalloc.flsim import ToySetup, run_toy, wgptm_loss_correlation

setup = ToySetup()
schemes = ("joint", "full_power", "sync_joint", "async_oma")
traces = {s: [] for s in schemes}
for seed in range(5):
    task = setup.task(seed)
    for s in schemes:
        traces[s].append(run_toy(setup, s, 30, seed, task=task))

for s in schemes:
    reach = [t.rounds_to_reach(setup.loss_threshold(setup.task(t.seed))) for t in traces[s]]
    final = np.median([t.losses[-1] for t in traces[s]])
    print(f"{s:>11}: median rounds to halve the gap {np.median(reach):5.1f}, final loss {final:.4f}")

synchronous = [t for s in schemes if s != "async_oma" for t in traces[s]]
print(f"rank correlation of WGPTM and loss drop: {wgptm_loss_correlation(synchronous):.3f}")

# one trace as CSV
print(traces["joint"][0].to_csv_text().splitlines()[1])
