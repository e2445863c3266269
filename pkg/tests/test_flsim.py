import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wflalloc.core import RoundConfig
from wflalloc.flsim import (ToySetup, aggregate, async_schedule, local_train, make_channel_generator,
                            make_toy_task, run_async_oma, run_toy, run_training, spearman,
                            wgptm_loss_correlation, TrainingTrace)
from wflalloc.kernel import NumericalError
from wflalloc.noma import allocate_joint


def test_one_dimensional_closed_form():
    task = make_toy_task(1, [1], 1, seed=3, minibatch_size=1, regularization=0.5)
    x, y = float(task.features[0][0, 0, 0]), float(task.labels[0][0, 0])
    expected = x * y / (x * x + 0.5)
    assert task.local_optima[0][0] == pytest.approx(expected, rel=1e-12)
    task.learning_rate = 0.9 / task.L
    w = local_train(task.w0, 0, 400, task)
    assert w[0] == pytest.approx(expected, rel=1e-9)


def test_same_seed_same_task():
    a = make_toy_task(3, [4, 5, 6], 4, seed=11)
    b = make_toy_task(3, [4, 5, 6], 4, seed=11)
    for xa, xb in zip(a.features, b.features):
        assert np.array_equal(xa, xb)
    assert (a.m, a.L, a.G) == (b.m, b.L, b.G)
    with pytest.raises(ValueError):
        make_toy_task(1, [1], 0, seed=0)
    with pytest.raises(ValueError):
        make_toy_task(2, [1], 3, seed=0)


def test_gradient_bound_covers_probe_points():
    task = make_toy_task(3, [4, 5, 6], 4, seed=2)
    rng = np.random.default_rng(0)
    radius = np.linalg.norm(task.global_optimum)
    for _ in range(50):
        d = rng.normal(size=4)
        w = rng.uniform() * radius * d / np.linalg.norm(d)
        for k in range(3):
            assert np.linalg.norm(task.local_gradient(k, w)) <= task.G


def test_curvature_constants_bracket_hessians():
    task = make_toy_task(4, [3, 4, 5, 6], 5, seed=1)
    for k in range(4):
        eig = np.linalg.eigvalsh(task.local_hessian(k))
        assert task.m <= eig[0] + 1e-12 and eig[-1] <= task.L + 1e-12
    assert task.m >= task.regularization


def test_user_rate_scales_with_minibatch_count():
    task = make_toy_task(2, [4, 8], 3, seed=0, learning_rate=0.08)
    assert task.user_rate(0) == 0.02
    assert task.user_rate(1) == 0.01


def test_local_train_examples():
    task = make_toy_task(1, [3], 1, seed=5)
    w = np.array([2.0])
    assert np.array_equal(local_train(w, 0, 0, task), w)
    one = local_train(w, 0, 1, task, full_gradient=True)
    assert one == pytest.approx(w - task.user_rate(0) * task.local_gradient(0, w), rel=1e-15)
    with pytest.raises(ValueError):
        local_train(w, 0, -1, task)


def test_local_train_divergence_raises():
    task = make_toy_task(1, [2], 2, seed=0)
    task.learning_rate = 1e6
    with pytest.raises(NumericalError):
        local_train(np.ones(2), 0, 400, task)


@pytest.mark.parametrize("seed", range(4))
def test_contraction_towards_local_optimum(seed):
    task = make_toy_task(2, [5, 7], 4, seed=seed)
    rng = np.random.default_rng(seed)
    for k in range(2):
        assert task.user_rate(k) <= 1 / task.L
        w0 = rng.normal(size=4) * 3
        w = local_train(w0, k, 10, task, full_gradient=True)
        opt = task.local_optima[k]
        assert np.linalg.norm(w - opt) <= np.linalg.norm(w0 - opt)


@pytest.mark.parametrize("seed", range(4))
def test_full_gradient_linear_rate(seed):
    task = make_toy_task(3, [4, 6, 9], 5, seed=seed, learning_rate=0.3)
    for k in range(3):
        best = task.local_optimum_value(k)
        gap0 = task.local_loss(k, task.w0) - best
        c = task.contraction(k)
        assert 0 < c < 1
        for phi in (1, 5, 20):
            w = local_train(task.w0, k, phi, task, full_gradient=True)
            assert task.local_loss(k, w) - best <= (1 - c) ** phi * gap0 + 1e-9


def test_gradient_matches_finite_differences():
    task = make_toy_task(2, [3, 4], 6, seed=7)
    rng = np.random.default_rng(1)
    for _ in range(5):
        w = rng.normal(size=6)
        k = int(rng.integers(2))
        grad = task.local_gradient(k, w)
        h = 1e-6
        numeric = np.array([(task.local_loss(k, w + h * e) - task.local_loss(k, w - h * e)) / (2 * h)
                            for e in np.eye(6)])
        assert np.linalg.norm(grad - numeric) <= 1e-5 * np.linalg.norm(grad)


def test_aggregate_examples():
    assert np.array_equal(aggregate([np.array([3.0, 1.0])] * 3, [0.2, 0.3, 0.5]), [3.0, 1.0])
    assert aggregate([[0.0], [2.0]], [0.5, 0.5]) == pytest.approx([1.0])
    assert aggregate([[4.0], [0.0]], [0.25, 0.75]) == pytest.approx([1.0])
    with pytest.raises(ValueError):
        aggregate([[1.0], [1.0, 2.0]], [0.5, 0.5])


@given(st.lists(st.lists(st.floats(-100, 100), min_size=3, max_size=3), min_size=1, max_size=6),
       st.data())
def test_aggregate_stays_within_coordinate_bounds(models, data):
    raw = data.draw(st.lists(st.floats(0.01, 1.0), min_size=len(models), max_size=len(models)))
    weights = np.asarray(raw) / sum(raw)
    w = aggregate(models, weights)
    arr = np.asarray(models)
    assert np.all(w >= arr.min(axis=0) - 1e-9) and np.all(w <= arr.max(axis=0) + 1e-9)


def _zero_allocator(assignment, gains, users, config):
    res = allocate_joint(assignment, gains, users, config)
    zeros = tuple(0.0 for _ in users)
    metrics = res.metrics.__class__(zeros, 0.0, zeros, res.metrics.per_user_uplink_s, zeros)
    return res.__class__(res.scheme, res.bandwidths_hz, res.powers_w, metrics, 0.0,
                         res.solver_status)


def test_zero_minibatches_keep_loss_constant():
    setup = ToySetup()
    task = setup.task(0)
    gen = make_channel_generator(setup.num_users, setup.config.gain_scale)
    trace = run_training(task, _zero_allocator, gen, 3, 0, setup.config)
    assert len(set(trace.losses)) == 1
    assert trace.minibatches == [[0] * setup.num_users] * 3


def test_training_is_deterministic_and_exports_csv(tmp_path):
    setup = ToySetup()
    a = run_toy(setup, "joint", 4, seed=2)
    b = run_toy(setup, "joint", 4, seed=2)
    assert a.losses == b.losses and a.minibatches == b.minibatches
    assert all(math.isfinite(x) for x in a.losses)
    text = a.to_csv_text()
    lines = text.splitlines()
    assert lines[0].startswith("round,scheme,seed,loss,wgptm,duration_s,phi_0")
    assert len(lines) == 5 and lines[1].startswith("1,joint,2,")
    a.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text() == text


def test_minibatches_are_floored_allocations():
    setup = ToySetup()
    trace = run_toy(setup, "full_power", 2, seed=1)
    assert all(isinstance(p, int) and p >= 0 for row in trace.minibatches for p in row)


def test_median_loss_decreases_each_round():
    setup = ToySetup()
    drops = np.array([run_toy(setup, "joint", 12, seed=s).loss_decreases() for s in range(5)])
    assert np.all(np.median(drops, axis=0) > 0)


def _constant_channel(gains, flops):
    def draw(rng):
        return list(gains), list(flops)
    return draw


def test_async_identical_users_train_one_block():
    cfg = RoundConfig(num_subchannels=2, flops_per_minibatch=1e9)
    blocks, block_time, round_s = async_schedule([3e6] * 4, [8e9] * 4, [10] * 4, cfg)
    assert list(blocks) == [1] * 4
    assert block_time == pytest.approx([4 * 10 * 1e9 / 8e9] * 4)
    task = make_toy_task(4, [10] * 4, 3, seed=0, learning_rate=0.002)
    trace = run_async_oma(task, cfg, 2, 0, _constant_channel([3e6] * 4, [8e9] * 4))
    assert trace.minibatches == [[40] * 4] * 2
    assert trace.wgptm == [4.0, 4.0]
    assert trace.round_durations_s[0] == pytest.approx(round_s)


def test_async_single_user_is_plain_sgd():
    cfg = RoundConfig(num_subchannels=1, flops_per_minibatch=1e9)
    task = make_toy_task(1, [6], 3, seed=4, learning_rate=0.01)
    gen = _constant_channel([3e6], [8e9])
    trace = run_async_oma(task, cfg, 3, 9, gen)
    rng = np.random.default_rng(9)
    w = task.w0.copy()
    for t in range(3):
        gen(rng)
        w = local_train(w, 0, 4 * 6, task, rng)
        assert trace.losses[t + 1] == pytest.approx(task.global_loss(w), rel=1e-12)


def test_async_faster_users_fit_more_blocks():
    cfg = RoundConfig(num_subchannels=2, flops_per_minibatch=1e9)
    flops = [2e9, 9e9, 2e9, 9e9]
    blocks, block_time, _ = async_schedule([1e6, 2e6, 3e6, 4e6], flops, [10] * 4, cfg)
    slow, fast = blocks[[0, 2]], blocks[[1, 3]]
    assert fast.min() >= slow.max() and fast.max() > slow.max()
    assert block_time[1] < block_time[0]


def test_spearman_examples():
    assert spearman([1, 2, 3, 4], [10, 20, 25, 100]) == pytest.approx(1.0)
    assert spearman([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0)
    with pytest.raises(ValueError, match="zero variance"):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        spearman([1, 2], [1])


def test_correlation_validation():
    flat = TrainingTrace("x", 0, losses=list(range(30, -1, -1)), wgptm=[1.0] * 30)
    with pytest.raises(ValueError, match="zero variance"):
        wgptm_loss_correlation([flat], early_fraction=1.0)
    short = TrainingTrace("x", 0, losses=[3.0, 2.0, 1.0], wgptm=[1.0, 2.0])
    with pytest.raises(ValueError, match="at least"):
        wgptm_loss_correlation([short])
    values = np.linspace(0.1, 2.0, 20)
    losses = np.concatenate(([100.0], 100.0 - np.cumsum(values ** 2)))
    mono = TrainingTrace("x", 0, losses=list(losses), wgptm=list(values))
    assert wgptm_loss_correlation([mono], early_fraction=1.0) == pytest.approx(1.0)


def test_correlation_keeps_operation_name():
    from wflalloc import flsim
    assert flsim.theorem1_correlation is flsim.wgptm_loss_correlation
