import numpy as np
from hypothesis import HealthCheck, settings

from wflalloc.core import RoundConfig, UserProfile

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_users(gains, betas=None, counts=None, weights=None):
    """User profiles with weights proportional to mini-batch counts unless given."""
    k = len(gains)
    betas = [7.5e9] * k if betas is None else betas
    counts = [20] * k if counts is None else counts
    if weights is None:
        weights = np.asarray(counts, dtype=float) / np.sum(counts)
    return [UserProfile(i, int(counts[i]), float(weights[i]), float(betas[i]), float(gains[i]))
            for i in range(k)]


def random_users(rng, k, config=RoundConfig()):
    """Draw from the default scenario distributions (weights proportional to |M_k|)."""
    gains = config.gain_scale * 10.0 ** (rng.uniform(2, 15, size=k) / 10.0)
    betas = rng.uniform(6e9, 9e9, size=k)
    counts = rng.integers(15, 26, size=k)
    return make_users(gains, betas, counts), [float(g) for g in gains]
