"""Toy federated training driven by per-round allocations.

Each user holds a ridge-regression problem, which is strongly convex and
smooth by construction, so the link between a round's weighted proportion of
trained mini-batches and the drop in global loss can be observed directly.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .baselines import oma_slot_durations
from .clustering import cluster_sorted
from .core import RoundConfig, UserProfile
from .kernel import NumericalError


@dataclass
class ToyTask:
    """Per-user ridge regression split into equally sized mini-batches.

    ``features[k]`` has shape ``(minibatch_count_k, minibatch_size, dimension)``.
    ``m``/``L`` are the extreme Hessian eigenvalues over all local objectives
    and the global one, ``G`` an empirical bound on mini-batch gradient norms.
    """

    dimension: int
    features: list
    labels: list
    regularization: float
    learning_rate: float
    m: float
    L: float
    G: float
    w0: np.ndarray
    weights: np.ndarray
    local_optima: list = field(default_factory=list)
    global_optimum: np.ndarray = None

    @property
    def num_users(self):
        return len(self.features)

    @property
    def minibatch_counts(self):
        return [x.shape[0] for x in self.features]

    def user_rate(self, k):
        """Per-mini-batch step size ``eta / |M_k|``."""
        return self.learning_rate / self.features[k].shape[0]

    def contraction(self, k):
        """``c_k = 2 m eta_k - m L eta_k^2``."""
        eta = self.user_rate(k)
        return 2 * self.m * eta - self.m * self.L * eta ** 2

    def _flat(self, k):
        x = self.features[k]
        return x.reshape(-1, self.dimension), self.labels[k].reshape(-1)

    def local_loss(self, k, w):
        x, y = self._flat(k)
        r = x @ w - y
        return 0.5 * float(r @ r) / len(y) + 0.5 * self.regularization * float(w @ w)

    def local_gradient(self, k, w):
        x, y = self._flat(k)
        return x.T @ (x @ w - y) / len(y) + self.regularization * w

    def minibatch_gradient(self, k, b, w):
        x, y = self.features[k][b], self.labels[k][b]
        return x.T @ (x @ w - y) / len(y) + self.regularization * w

    def local_hessian(self, k):
        x, _ = self._flat(k)
        return x.T @ x / x.shape[0] + self.regularization * np.eye(self.dimension)

    def global_loss(self, w):
        return math.fsum(e * self.local_loss(k, w) for k, e in enumerate(self.weights))

    def local_optimum_value(self, k):
        return self.local_loss(k, self.local_optima[k])

    def global_optimum_value(self):
        return self.global_loss(self.global_optimum)


def make_toy_task(num_users, minibatch_counts, dimension, seed, minibatch_size=5,
                  regularization=0.1, learning_rate=0.03, noise=0.1, probe_points=64):
    """Random i.i.d. ridge-regression task; every mini-batch follows one distribution."""
    if dimension < 1:
        raise ValueError("dimension must be >= 1")
    counts = list(minibatch_counts)
    if len(counts) != num_users:
        raise ValueError("one mini-batch count per user is required")
    rng = np.random.default_rng(seed)
    # Fixed signal energy keeps the initial loss gap comparable across seeds.
    w_true = rng.normal(size=dimension)
    w_true *= math.sqrt(dimension) / np.linalg.norm(w_true)
    features, labels = [], []
    for count in counts:
        x = rng.normal(size=(count, minibatch_size, dimension))
        features.append(x)
        labels.append(x @ w_true + noise * rng.normal(size=(count, minibatch_size)))
    weights = np.asarray(counts, dtype=float) / sum(counts)
    task = ToyTask(dimension, features, labels, regularization, learning_rate,
                   m=0.0, L=0.0, G=0.0, w0=np.zeros(dimension), weights=weights)

    hessians = [task.local_hessian(k) for k in range(num_users)]
    global_h = sum(e * h for e, h in zip(weights, hessians))
    eig = [np.linalg.eigvalsh(h) for h in hessians + [global_h]]
    task.m = float(min(e[0] for e in eig))
    task.L = float(max(e[-1] for e in eig))
    rhs = [task._flat(k)[0].T @ task._flat(k)[1] / task._flat(k)[0].shape[0]
           for k in range(num_users)]
    task.local_optima = [np.linalg.solve(h, b) for h, b in zip(hessians, rhs)]
    task.global_optimum = np.linalg.solve(global_h, sum(e * b for e, b in zip(weights, rhs)))

    # Probe the segment between the start point and the optima (plus a margin)
    # and record the largest mini-batch gradient seen.
    radius = 1.5 * max(np.linalg.norm(task.global_optimum - task.w0), 1.0)
    largest = 0.0
    for _ in range(probe_points):
        direction = rng.normal(size=dimension)
        w = task.w0 + radius * rng.uniform() * direction / np.linalg.norm(direction)
        for k in range(num_users):
            for b in range(counts[k]):
                largest = max(largest, float(np.linalg.norm(task.minibatch_gradient(k, b, w))))
    task.G = largest
    return task


def local_train(w_start, user, minibatches_to_train, task: ToyTask, rng=None,
                full_gradient=False):
    """Run ``minibatches_to_train`` sequential SGD steps at rate ``eta / |M_k|``.

    Mini-batches are visited in one shuffled order (drawn from ``rng``, or
    natural order without one) that repeats every epoch. ``full_gradient``
    replaces each mini-batch gradient with the exact local gradient.
    """
    count = int(minibatches_to_train)
    if count < 0:
        raise ValueError("mini-batch count must be non-negative")
    w = np.array(w_start, dtype=float)
    if count == 0:
        return w
    k = user.user_id if isinstance(user, UserProfile) else int(user)
    eta = task.user_rate(k)
    n_batches = task.features[k].shape[0]
    order = rng.permutation(n_batches) if rng is not None else np.arange(n_batches)
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(count):
            if full_gradient:
                grad = task.local_gradient(k, w)
            else:
                grad = task.minibatch_gradient(k, order[step % n_batches], w)
            w -= eta * grad
            if not np.all(np.isfinite(w)):
                raise NumericalError(f"local training of user {k} diverged")
    return w


def aggregate(local_models, weights):
    models = [np.asarray(w, dtype=float) for w in local_models]
    if len({m.shape for m in models}) != 1:
        raise ValueError("local models differ in dimension")
    if len(models) != len(weights):
        raise ValueError("one weight per model is required")
    return np.sum([e * m for e, m in zip(weights, models)], axis=0)


@dataclass
class TrainingTrace:
    """Global loss before round 1 and after every round, plus per-round allocation data."""

    scheme: str
    seed: int
    losses: list = field(default_factory=list)
    wgptm: list = field(default_factory=list)
    minibatches: list = field(default_factory=list)
    round_durations_s: list = field(default_factory=list)

    @property
    def num_rounds(self):
        return len(self.wgptm)

    def loss_decreases(self):
        return [a - b for a, b in zip(self.losses[:-1], self.losses[1:])]

    def rounds_to_reach(self, threshold):
        """First round whose loss is at or below ``threshold``; ``inf`` if never."""
        for t, loss in enumerate(self.losses):
            if loss <= threshold:
                return t
        return math.inf

    def to_csv_text(self):
        num_users = len(self.minibatches[0]) if self.minibatches else 0
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["round", "scheme", "seed", "loss", "wgptm", "duration_s"]
                        + [f"phi_{k}" for k in range(num_users)])
        for t in range(self.num_rounds):
            writer.writerow([t + 1, self.scheme, self.seed, repr(self.losses[t + 1]),
                             repr(float(self.wgptm[t])), repr(float(self.round_durations_s[t]))]
                            + [str(int(p)) for p in self.minibatches[t]])
        return buf.getvalue()

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())


def _profiles(task, gains, flops):
    counts = task.minibatch_counts
    return [UserProfile(k, counts[k], float(task.weights[k]), float(flops[k]), float(gains[k]))
            for k in range(task.num_users)]


def run_training(task: ToyTask, allocator, channel_generator: Callable, num_rounds, seed,
                 config: RoundConfig, scheme=None, clusterer=cluster_sorted) -> TrainingTrace:
    """Train round by round under a block-fading channel.

    ``channel_generator(rng)`` returns ``(gains, flops_per_second)`` for the
    round; ``allocator(assignment, gains, users, config)`` returns an
    :class:`~wflalloc.noma.AllocationResult`. Users train the whole number of
    mini-batches their allocation leaves room for.
    """
    rng = np.random.default_rng(seed)
    trace = TrainingTrace(scheme or getattr(allocator, "__name__", "custom"), seed)
    w = task.w0.copy()
    trace.losses.append(task.global_loss(w))
    for _ in range(num_rounds):
        gains, flops = channel_generator(rng)
        users = _profiles(task, gains, flops)
        assignment = clusterer(gains, config.num_subchannels)
        result = allocator(assignment, gains, users, config)
        phis = [math.floor(p + 1e-9) for p in result.metrics.per_user_minibatches]
        models = [local_train(w, k, phis[k], task, rng) for k in range(task.num_users)]
        w = aggregate(models, task.weights)
        trace.losses.append(task.global_loss(w))
        trace.wgptm.append(result.objective)
        trace.minibatches.append(phis)
        trace.round_durations_s.append(config.round_duration_s)
    return trace


def async_schedule(gains, flops, minibatch_counts, config: RoundConfig, iterations=4):
    """Idealised asynchronous MC-OMA round.

    Per equal-bandwidth subchannel, the round is the sum of its users'
    full-power TDMA upload times plus the time the slowest of them needs for
    ``iterations`` epochs. The longest subchannel sets the global round; each
    user fits as many blocks of ``iterations`` epochs as its subchannel's
    spare time allows (at least one). Returns ``(blocks, block_time_s,
    round_s)`` with the first two per user.
    """
    assignment = cluster_sorted(gains, config.num_subchannels)
    counts = np.asarray(minibatch_counts, dtype=float)
    block_time = iterations * counts * config.flops_per_minibatch / np.asarray(flops, dtype=float)
    upload_total = np.empty(len(gains))
    sub_rounds = []
    for sub in assignment.subchannels:
        d = oma_slot_durations([gains[k] for k in sub], config.equal_bandwidth_hz, config)
        total = float(np.sum(d))
        upload_total[list(sub)] = total
        sub_rounds.append(total + max(block_time[k] for k in sub))
    round_s = max(sub_rounds)
    blocks = np.maximum(1, np.floor((round_s - upload_total) / block_time + 1e-9)).astype(int)
    return blocks, block_time, round_s + config.downlink_delay_s


def run_async_oma(task: ToyTask, config: RoundConfig, num_global_rounds, seed,
                  channel_generator: Callable, iterations=4) -> TrainingTrace:
    """Asynchronous MC-OMA baseline with free intermediate aggregations.

    Within a global round, a user that finishes a block of ``iterations``
    epochs has its model averaged with the models of every user finishing a
    block at the same instant; the global aggregation closes the round.
    """
    rng = np.random.default_rng(seed)
    trace = TrainingTrace("async_oma", seed)
    counts = task.minibatch_counts
    w = task.w0.copy()
    trace.losses.append(task.global_loss(w))
    for _ in range(num_global_rounds):
        gains, flops = channel_generator(rng)
        blocks, block_time, round_s = async_schedule(gains, flops, counts, config, iterations)
        models = [w.copy() for _ in range(task.num_users)]
        orders = [rng.permutation(c) for c in counts]
        events = sorted({round(j * block_time[k], 9)
                         for k in range(task.num_users) for j in range(1, blocks[k] + 1)})
        done = np.zeros(task.num_users, dtype=int)
        for instant in events:
            due = [k for k in range(task.num_users)
                   if done[k] < blocks[k] and round((done[k] + 1) * block_time[k], 9) == instant]
            for k in due:
                models[k] = _train_block(models[k], k, iterations * counts[k], task, orders[k])
                done[k] += 1
            if len(due) > 1:
                merged = aggregate([models[k] for k in due], task.weights[due] / task.weights[due].sum())
                for k in due:
                    models[k] = merged.copy()
        w = aggregate(models, task.weights)
        phis = [int(b * iterations * c) for b, c in zip(blocks, counts)]
        trace.losses.append(task.global_loss(w))
        trace.wgptm.append(float(np.sum(task.weights * blocks * iterations)))
        trace.minibatches.append(phis)
        trace.round_durations_s.append(float(round_s))
    return trace


def _train_block(w, k, steps, task, order):
    eta = task.user_rate(k)
    n = len(order)
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(steps):
            w = w - eta * task.minibatch_gradient(k, order[step % n], w)
            if not np.all(np.isfinite(w)):
                raise NumericalError(f"local training of user {k} diverged")
    return w


def spearman(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValueError("paired samples differ in length")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise ValueError("correlation undefined: a sample has zero variance")
    return float(stats.spearmanr(x, y).statistic)


def wgptm_loss_correlation(traces: Sequence[TrainingTrace], early_fraction=0.3, min_pairs=20):
    """Rank correlation of round WGPTM with the loss drop over each trace's early rounds."""
    xs, ys = [], []
    for trace in traces:
        window = max(1, math.ceil(early_fraction * trace.num_rounds))
        xs.extend(trace.wgptm[:window])
        ys.extend(trace.loss_decreases()[:window])
    if len(xs) < min_pairs:
        raise ValueError(f"need at least {min_pairs} (WGPTM, loss drop) pairs, got {len(xs)}")
    return spearman(xs, ys)


theorem1_correlation = wgptm_loss_correlation


def make_channel_generator(num_users, gain_scale, gain_db_range=(2.0, 15.0),
                           flops_per_second_range=(6e9, 9e9)):
    """Block-fading draws: fresh gains and processing speeds every round."""
    lo_db, hi_db = gain_db_range

    def draw(rng):
        gains = gain_scale * 10.0 ** (rng.uniform(lo_db, hi_db, size=num_users) / 10.0)
        flops = rng.uniform(*flops_per_second_range, size=num_users)
        return [float(g) for g in gains], [float(b) for b in flops]
    return draw


@dataclass(frozen=True)
class ToySetup:
    """Default toy experiment: small ridge task, slow enough that 40 rounds do not plateau.

    A mini-batch costs 1 GFLOP here, so users train a few epochs per round
    rather than dozens, and the step size keeps the loss gap shrinking by a
    few percent per round.
    """

    num_users: int = 8
    dimension: int = 10
    num_subchannels: int = 4
    minibatch_range: tuple = (10, 20)
    minibatch_size: int = 5
    regularization: float = 1.0
    learning_rate: float = 0.002
    flops_per_minibatch: float = 1e9
    threshold_fraction: float = 0.5

    @property
    def config(self):
        return RoundConfig(num_subchannels=self.num_subchannels,
                           flops_per_minibatch=self.flops_per_minibatch)

    def task(self, seed):
        rng = np.random.default_rng(seed)
        lo, hi = self.minibatch_range
        counts = [int(c) for c in rng.integers(lo, hi, size=self.num_users, endpoint=True)]
        return make_toy_task(self.num_users, counts, self.dimension, seed,
                             minibatch_size=self.minibatch_size,
                             regularization=self.regularization,
                             learning_rate=self.learning_rate)

    def loss_threshold(self, task):
        """Loss at which ``threshold_fraction`` of the initial optimality gap remains."""
        best = task.global_optimum_value()
        return best + self.threshold_fraction * (task.global_loss(task.w0) - best)


def run_toy(setup: ToySetup, scheme, num_rounds, seed, task=None):
    """Train the toy task of ``seed`` under one allocation scheme (or ``"async_oma"``)."""
    from .baselines import SCHEMES

    task = task or setup.task(seed)
    config = setup.config
    channels = make_channel_generator(setup.num_users, config.gain_scale)
    if scheme == "async_oma":
        return run_async_oma(task, config, num_rounds, seed, channels)
    return run_training(task, SCHEMES[scheme], channels, num_rounds, seed, config, scheme=scheme)
