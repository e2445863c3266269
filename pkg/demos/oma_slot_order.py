"""
Slot order in TDMA
==================

With orthogonal access every user uploads alone at full power, so its slot
length does not depend on the order. The order decides how long each user can
train before its slot starts: the slots are packed to end with the round.
"""

import numpy as np

from wflalloc import RoundConfig
from wflalloc.baselines import best_oma_order, oma_slot_durations, oma_tails

config = RoundConfig()
gains = [1.5e6, 4e6, 1.2e7]
slots = oma_slot_durations(gains, config.equal_bandwidth_hz, config)
weights = np.array([1.0, 1.0, 1.0])
window = config.training_window_s
print("slot lengths (s):", np.round(slots, 3))

for order in [(0, 1, 2), (2, 1, 0)]:
    train = window - oma_tails(slots, order)
    print(f"order {order}: training seconds {np.round(train, 3)}, total {train.sum():.3f}")

print("enumerated best order:", best_oma_order(slots, weights, window))
