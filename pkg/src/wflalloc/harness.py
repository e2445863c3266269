"""Scenario files, random realizations and Monte-Carlo sweeps over the schemes."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .baselines import SCHEMES
from .clustering import cluster_random, cluster_sorted
from .core import InfeasibleDelayError, RoundConfig, UserProfile
from .kernel import NumericalError

log = logging.getLogger(__name__)

SWEEP_PARAMS = ("users", "subchannels", "duration")
SWEEP_HEADER = ("param", "scheme", "mean_wgptm", "std_wgptm", "trials")
MONTECARLO_HEADER = ("trial", "scheme", "wgptm", "status")
NUMERIC_ERRORS = (NumericalError, InfeasibleDelayError, FloatingPointError, ZeroDivisionError)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to draw and solve independent rounds."""

    config: RoundConfig = field(default_factory=RoundConfig)
    num_users: int = 25
    gain_db_range: tuple = (2.0, 15.0)
    flops_per_second_range: tuple = (6e9, 9e9)
    dataset_size_range: tuple = (300, 500)
    minibatch_size: int = 20
    clustering: str = "sorted"
    schemes: tuple = tuple(SCHEMES)
    num_trials: int = 1000
    seed: int = 0

    def __post_init__(self):
        for name in ("gain_db_range", "flops_per_second_range", "dataset_size_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must satisfy low < high")
        if self.flops_per_second_range[0] <= 0 or self.dataset_size_range[0] < 1:
            raise ValueError("FLOPS and dataset sizes must be positive")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")
        if self.num_users < self.config.num_subchannels:
            raise ValueError("num_users must be at least num_subchannels")
        if self.clustering not in ("sorted", "random"):
            raise ValueError("clustering must be 'sorted' or 'random'")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ValueError(f"unknown schemes {unknown}; valid: {sorted(SCHEMES)}")
        if self.num_trials < 1:
            raise ValueError("num_trials must be >= 1")

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_config(self, **changes):
        return self.replace(config=dataclasses.replace(self.config, **changes))

    def to_dict(self):
        out = dataclasses.asdict(self)
        for key in ("gain_db_range", "flops_per_second_range", "dataset_size_range", "schemes"):
            out[key] = list(out[key])
        return out


def scenario_from_dict(data) -> Scenario:
    data = dict(data)
    config_fields = {f.name for f in dataclasses.fields(RoundConfig)}
    config_data = data.pop("config", {})
    unknown = set(config_data) - config_fields
    if unknown:
        raise ValueError(f"unknown config fields {sorted(unknown)}; valid: {sorted(config_fields)}")
    scenario_fields = {f.name for f in dataclasses.fields(Scenario)} - {"config"}
    unknown = set(data) - scenario_fields
    if unknown:
        raise ValueError(f"unknown scenario fields {sorted(unknown)}; valid: {sorted(scenario_fields)}")
    for key in ("gain_db_range", "flops_per_second_range", "dataset_size_range", "schemes"):
        if key in data:
            data[key] = tuple(data[key])
    return Scenario(config=RoundConfig(**config_data), **data)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(json.load(fh))


def generate_realization(scenario: Scenario, trial_index):
    """Independent draw of users and normalized gains for one trial.

    Seeded by ``(scenario.seed, trial_index)`` only, so a trial sees the same
    draw whatever else is swept or run in parallel.
    """
    rng = np.random.default_rng([scenario.seed, trial_index])
    k = scenario.num_users
    lo_db, hi_db = scenario.gain_db_range
    gains = scenario.config.gain_scale * 10.0 ** (rng.uniform(lo_db, hi_db, size=k) / 10.0)
    flops = rng.uniform(*scenario.flops_per_second_range, size=k)
    d_lo, d_hi = scenario.dataset_size_range
    sizes = rng.integers(d_lo, d_hi, size=k, endpoint=True)
    counts = np.maximum(1, np.rint(sizes / scenario.minibatch_size)).astype(int)
    weights = sizes / sizes.sum()
    users = [UserProfile(i, int(counts[i]), float(weights[i]), float(flops[i]), float(gains[i]))
             for i in range(k)]
    return users, [float(g) for g in gains]


def assign(scenario: Scenario, gains, trial_index):
    if scenario.clustering == "sorted":
        return cluster_sorted(gains, scenario.config.num_subchannels)
    rng = np.random.default_rng([scenario.seed, trial_index, 1])
    return cluster_random(gains, scenario.config.num_subchannels, rng)


def run_trial(scenario: Scenario, trial_index, schemes=None):
    """``{scheme: AllocationResult}`` for one realization; every scheme sees the same draw."""
    users, gains = generate_realization(scenario, trial_index)
    assignment = assign(scenario, gains, trial_index)
    return {name: SCHEMES[name](assignment, gains, users, scenario.config)
            for name in (schemes or scenario.schemes)}


def _trial_objectives(args):
    scenario, trial_index, schemes = args
    try:
        results = run_trial(scenario, trial_index, schemes)
    except NUMERIC_ERRORS as exc:
        return trial_index, None, f"{type(exc).__name__}: {exc}"
    return trial_index, {k: (r.objective, r.solver_status) for k, r in results.items()}, None


def worker_count():
    """Process count from ``WFL_ALLOC_THREADS`` (unset or 0 means one per CPU)."""
    raw = os.environ.get("WFL_ALLOC_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"WFL_ALLOC_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("WFL_ALLOC_THREADS must be >= 0")
    return n or os.cpu_count() or 1


def run_trials(scenario: Scenario, schemes=None, num_trials=None):
    """Solve trials ``0..num_trials-1``; returns results ordered by trial index.

    Each entry is ``(trial_index, {scheme: (wgptm, status)} or None, error)``.
    """
    n = scenario.num_trials if num_trials is None else num_trials
    schemes = tuple(schemes or scenario.schemes)
    jobs = [(scenario, t, schemes) for t in range(n)]
    workers = min(worker_count(), n)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_trial_objectives, jobs, chunksize=max(1, n // (4 * workers))))
    else:
        out = [_trial_objectives(job) for job in jobs]
    out.sort(key=lambda item: item[0])
    for t, _, err in out:
        if err is not None:
            log.warning("trial %d skipped: %s", t, err)
    return out


def _apply(scenario: Scenario, sweep_param, value):
    if sweep_param == "users":
        return scenario.replace(num_users=int(value))
    if sweep_param == "subchannels":
        return scenario.with_config(num_subchannels=int(value))
    if sweep_param == "duration":
        return scenario.with_config(round_duration_s=float(value))
    raise ValueError(f"unknown sweep parameter {sweep_param!r}; valid: {list(SWEEP_PARAMS)}")


def run_sweep(scenario: Scenario, sweep_param, values, schemes=None, num_trials=None):
    """Mean and standard deviation of WGPTM per (value, scheme), long format.

    Trials that raise a numeric error are skipped; ``trials`` counts the
    trials actually averaged.
    """
    values = list(values)
    if values != sorted(values):
        raise ValueError("sweep values must be sorted")
    schemes = tuple(schemes or scenario.schemes)
    rows = []
    for value in values:
        point = _apply(scenario, sweep_param, value)
        results = run_trials(point, schemes, num_trials)
        for name in schemes:
            vals = np.array([res[name][0] for _, res, _ in results if res is not None])
            rows.append({
                "param": value,
                "scheme": name,
                "mean_wgptm": float(vals.mean()) if vals.size else math.nan,
                "std_wgptm": float(vals.std()) if vals.size else math.nan,
                "trials": int(vals.size),
            })
    return rows


def montecarlo(scenario: Scenario, schemes=None, num_trials=None):
    """Per-trial WGPTM of every scheme on one scenario (long format)."""
    schemes = tuple(schemes or scenario.schemes)
    rows = []
    for t, res, _ in run_trials(scenario, schemes, num_trials):
        if res is None:
            continue
        for name in schemes:
            wgptm, status = res[name]
            rows.append({"trial": t, "scheme": name, "wgptm": wgptm, "status": status})
    return rows


def _cell(value):
    return repr(float(value)) if isinstance(value, float) else str(value)


def rows_to_csv(rows, header):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(row[h]) for h in header])
    return buf.getvalue()
