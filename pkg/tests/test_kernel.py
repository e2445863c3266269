import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wflalloc.kernel import (NumericalError, allocate_budget, equalize_budget, fd_derivative,
                             hessian_psd_check, minimize_1d)


def test_minimize_1d_examples():
    x, fx = minimize_1d(lambda x: (x - 2) ** 2, 0, 5, tol=1e-8)
    assert x == pytest.approx(2.0, abs=1e-7)
    assert fx == pytest.approx(0.0, abs=1e-14)
    assert minimize_1d(lambda x: x, 1, 3)[0] == 1.0
    assert minimize_1d(lambda x: -x, 1, 3)[0] == 3.0
    assert minimize_1d(lambda x: math.exp(x) + math.exp(-x), -2, 2)[0] == pytest.approx(0, abs=1e-7)


def test_minimize_1d_errors():
    with pytest.raises(ValueError):
        minimize_1d(lambda x: x, 2, 1)
    with pytest.raises(NumericalError):
        minimize_1d(lambda x: math.nan, 0, 1)


@given(st.floats(-5, 5), st.floats(0.1, 10), st.floats(-3, 3))
def test_minimize_1d_beats_grid(center, curvature, tilt):
    def f(x):
        return curvature * (x - center) ** 2 + tilt * x
    x, fx = minimize_1d(f, -4.0, 4.0, tol=1e-9)
    grid = np.linspace(-4.0, 4.0, 2001)
    assert fx <= min(f(g) for g in grid) + 1e-9


def test_allocate_budget_examples():
    assert allocate_budget([lambda b: 1 / b, lambda b: 1 / b], 2.0, [1e-3, 1e-3]) == \
        pytest.approx([1.0, 1.0], rel=1e-6)
    got = allocate_budget([lambda b: 1 / b, lambda b: 4 / b], 3.0, [1e-3, 1e-3])
    assert got == pytest.approx([1.0, 2.0], rel=1e-6)
    assert list(allocate_budget([lambda b: 1 / b], 5.0, [1e-3])) == [5.0]


def test_allocate_budget_errors():
    with pytest.raises(ValueError):
        allocate_budget([lambda b: 1 / b] * 2, 1.0, [0.6, 0.6])
    with pytest.raises(ValueError):
        allocate_budget([lambda b: 1 / b] * 2, 0.0, [0.0, 0.0])


@given(st.lists(st.floats(0.1, 50.0), min_size=2, max_size=6), st.floats(1e5, 1e8))
def test_allocate_budget_kkt(costs, budget):
    # Budgets in Hz, where the finite-difference step is relative.
    funcs = [lambda b, c=c: c / b for c in costs]
    lb = [1e-3 * budget / len(costs)] * len(costs)
    alloc = allocate_budget(funcs, budget, lb)
    assert alloc.sum() == pytest.approx(budget, rel=1e-7)
    # Closed form for c/B costs: bandwidth proportional to sqrt(c).
    expected = budget * np.sqrt(costs) / np.sum(np.sqrt(costs))
    assert alloc == pytest.approx(expected, rel=1e-5)
    slopes = [fd_derivative(f, b) for f, b in zip(funcs, alloc)]
    assert max(slopes) - min(slopes) <= 10 * 1e-7 * max(abs(s) for s in slopes) + 1e-9


@given(st.lists(st.floats(0.1, 50.0), min_size=2, max_size=6), st.floats(1.0, 100.0))
def test_equalize_budget_levels(costs, budget):
    funcs = [lambda b, c=c: c / b for c in costs]
    alloc = equalize_budget(funcs, budget, [1e-6 * budget] * len(costs))
    assert alloc.sum() == pytest.approx(budget, rel=1e-12)
    levels = [f(b) for f, b in zip(funcs, alloc)]
    assert max(levels) / min(levels) - 1 <= 1e-10
    assert alloc == pytest.approx(budget * np.asarray(costs) / sum(costs), rel=1e-10)


def test_hessian_examples():
    lo, ok = hessian_psd_check(lambda x, y: x * x + y * y, (1.0, 1.0))
    assert lo == pytest.approx(2.0, rel=1e-4) and ok
    lo, ok = hessian_psd_check(lambda x, y: x * x - y * y, (0.0, 0.0))
    assert lo == pytest.approx(-2.0, rel=1e-4) and not ok
    with pytest.raises(NumericalError):
        hessian_psd_check(lambda x, y: math.inf, (0.0, 0.0))
