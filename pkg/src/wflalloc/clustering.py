"""Assignment of users to NOMA subchannels."""
from __future__ import annotations

import numpy as np

from .core import Assignment


def _label_cyclically(order, gains, num_subchannels):
    groups = [[] for _ in range(num_subchannels)]
    for position, k in enumerate(order):
        groups[position % num_subchannels].append(int(k))
    # SIC needs each subchannel ordered by ascending gain; stable on ties.
    return Assignment(tuple(tuple(sorted(g, key=lambda k: (gains[k], k))) for g in groups))


def _gains_of(users_or_gains):
    """Accept either raw gains or a sequence of :class:`UserProfile`."""
    items = list(users_or_gains)
    if items and hasattr(items[0], "normalized_gain"):
        return np.array([u.normalized_gain for u in items], dtype=float)
    return np.asarray(items, dtype=float)


def _check(num_users, num_subchannels):
    if num_subchannels < 1:
        raise ValueError("num_subchannels must be >= 1")
    if num_users < num_subchannels:
        raise ValueError(f"cannot fill {num_subchannels} subchannels with {num_users} users")


def cluster_sorted(gains, num_subchannels) -> Assignment:
    """Sort users by ascending gain and deal them out to subchannels 1..N in turn."""
    gains = _gains_of(gains)
    _check(len(gains), num_subchannels)
    order = np.argsort(gains, kind="stable")
    return _label_cyclically(order, gains, num_subchannels)


def cluster_random(gains, num_subchannels, seed) -> Assignment:
    """Random permutation dealt out cyclically; ``seed`` may be an int or a Generator."""
    gains = _gains_of(gains)
    _check(len(gains), num_subchannels)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    order = rng.permutation(len(gains))
    return _label_cyclically(order, gains, num_subchannels)
