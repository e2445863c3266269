"""
WGPTM against round duration
============================

Mean WGPTM grows linearly with the round length once every user can upload
in time. At very short rounds some users get no training time, and the
positive-part clamp bends the curves, so a straight line fits less well there.
"""

import numpy as np

from wflalloc.harness import Scenario, rows_to_csv, run_sweep, SWEEP_HEADER

durations = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0]
scenario = Scenario(num_trials=20)
rows = run_sweep(scenario, "duration", durations, schemes=["joint", "power_only", "full_power",
                                                           "oma", "sync_joint"])

for scheme in ("joint", "power_only", "full_power", "oma", "sync_joint"):
    means = np.array([r["mean_wgptm"] for r in rows if r["scheme"] == scheme])
    tail = np.polyfit(durations[1:], means[1:], 1)
    print(f"{scheme:>11}: " + " ".join(f"{m:7.2f}" for m in means)
          + f"   slope from T>=10: {tail[0]:.3f} per s")

# tidy CSV, ready for any plotting tool
print()
print(rows_to_csv(rows[:5], SWEEP_HEADER))
