import numpy as np
import pytest
from hypothesis import given, strategies as st

from wflalloc.clustering import cluster_random, cluster_sorted

from conftest import make_users


def test_sorted_example():
    a = cluster_sorted([1.0, 2.0, 3.0, 4.0], 2)
    assert a.subchannels == ((0, 2), (1, 3))


def test_sorted_accepts_user_profiles():
    users = make_users([4.0, 1.0, 3.0, 2.0])
    assert cluster_sorted(users, 2).subchannels == ((1, 2), (3, 0))


def test_sorted_edge_cases():
    assert cluster_sorted([3.0, 1.0, 2.0], 1).subchannels == ((1, 2, 0),)
    assert sorted(len(s) for s in cluster_sorted([3.0, 1.0, 2.0], 3).subchannels) == [1, 1, 1]
    with pytest.raises(ValueError):
        cluster_sorted([1.0, 2.0], 3)


def test_random_examples():
    gains = [5.0, 1.0, 4.0, 2.0, 3.0]
    assert cluster_random(gains, 2, 7) == cluster_random(gains, 2, 7)
    assert cluster_random(gains, 1, 3).subchannels == ((1, 3, 4, 2, 0),)
    sizes = [len(s) for s in cluster_random([1.0, 2.0, 3.0, 4.0], 2, 11).subchannels]
    assert sizes == [2, 2]
    with pytest.raises(ValueError):
        cluster_random([1.0], 2, 0)


def test_random_accepts_generator():
    gains = list(np.linspace(1, 2, 9))
    a = cluster_random(gains, 3, np.random.default_rng(5))
    b = cluster_random(gains, 3, np.random.default_rng(5))
    assert a == b


@given(st.lists(st.floats(0.1, 100.0), min_size=1, max_size=30), st.data())
def test_partition_balance_and_order(gains, data):
    n = data.draw(st.integers(1, len(gains)))
    seed = data.draw(st.integers(0, 2**32 - 1))
    for a in (cluster_sorted(gains, n), cluster_random(gains, n, seed)):
        members = sorted(k for s in a.subchannels for k in s)
        assert members == list(range(len(gains)))
        sizes = [len(s) for s in a.subchannels]
        assert max(sizes) - min(sizes) <= 1
        for s in a.subchannels:
            g = [gains[k] for k in s]
            assert g == sorted(g)
        a.validate(gains)
