"""Small convex-optimization toolkit used by the allocators.

Only what the bandwidth/power problems need: golden-section search, budget
splitting by bisection on the dual multiplier, level equalization for
min-max splits, and finite-difference curvature checks.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class NumericalError(ArithmeticError):
    pass


def _finite(value, where):
    if not math.isfinite(value):
        raise NumericalError(f"non-finite value {value!r} at {where!r}")
    return value


def minimize_1d(f, lo, hi, tol=1e-9):
    """Golden-section search for a convex ``f`` on ``[lo, hi]``.

    Returns ``(x, f(x))``. The bracket ends are compared against the interior
    estimate at the end, so a boundary minimum is returned exactly.
    """
    if not lo < hi:
        raise ValueError("minimize_1d requires lo < hi")
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = _finite(f(c), c), _finite(f(d), d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = _finite(f(c), c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = _finite(f(d), d)
        if b - a <= 4 * np.finfo(float).eps * max(abs(a), abs(b)):
            break
    x = 0.5 * (a + b)
    candidates = [(f(x), x), (f(float(lo)), float(lo)), (f(float(hi)), float(hi))]
    fx, x = min(candidates)
    return x, _finite(fx, x)


def fd_step(x):
    """Central-difference step used for bandwidth derivatives (Hz).

    The 1e-3 floor only applies where it stays well inside the positive axis.
    """
    h = max(1e-6 * abs(x), 1e-3)
    return h if h < 0.5 * abs(x) else 1e-6 * abs(x)


def fd_derivative(f, x, step=None):
    h = fd_step(x) if step is None else step
    return (f(x + h) - f(x - h)) / (2.0 * h)


class _Converged(Exception):
    def __init__(self, x):
        self.x = x


def _solve_monotone(func, lo, hi, accept):
    """Root of a monotone ``func`` on ``[lo, hi]``, stopping early once ``accept`` holds."""
    def wrapped(x):
        value = func(x)
        if accept(value):
            raise _Converged(x)
        return value
    try:
        return brentq(wrapped, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=500)
    except _Converged as done:
        return done.x


def allocate_budget(per_channel_cost, budget, lower_bounds, tol=1e-7, derivative=None):
    """Split ``budget`` among channels to minimise ``sum(g_n(B_n))``.

    Each ``g_n`` must be convex and non-increasing, so the budget binds at the
    optimum. For a multiplier ``lam`` every channel independently solves
    ``g_n'(B_n) = -lam`` (clamped to its bounds); ``lam`` is then bisected in
    log-space until the allocations sum to ``budget`` within ``tol * budget``.
    ``derivative(n, B)`` overrides the central-difference slope of channel n.
    """
    costs = list(per_channel_cost)
    lb = np.asarray(lower_bounds, dtype=float)
    if len(lb) != len(costs):
        raise ValueError("one lower bound per channel is required")
    if not budget > 0:
        raise ValueError("budget must be positive")
    if lb.sum() >= budget:
        raise ValueError("lower bounds exhaust the budget")
    if len(costs) == 1:
        return np.array([float(budget)])
    ub = budget - (lb.sum() - lb)
    slope = derivative or (lambda n, x: fd_derivative(costs[n], x))

    def response(lam):
        out = np.empty(len(costs))
        for n in range(len(costs)):
            def stationarity(x, n=n):
                return slope(n, x) + lam
            if stationarity(lb[n]) >= 0:
                out[n] = lb[n]
            elif stationarity(ub[n]) <= 0:
                out[n] = ub[n]
            else:
                out[n] = brentq(stationarity, lb[n], ub[n], xtol=1e-12 * budget, rtol=1e-13)
        return out

    def excess(log_lam):
        return response(math.exp(log_lam)).sum() - budget

    # The multiplier scale is the magnitude of a typical slope.
    start = abs(np.mean([slope(n, budget / len(costs)) for n in range(len(costs))])) or 1.0
    lo = hi = math.log(start)
    while excess(hi) > 0:
        hi += math.log(4.0)
        if hi - lo > 400:
            raise NumericalError("could not bracket the bandwidth multiplier")
    while excess(lo) < 0:
        lo -= math.log(4.0)
        if hi - lo > 400:
            raise NumericalError("could not bracket the bandwidth multiplier")
    log_lam = _solve_monotone(excess, lo, hi, lambda v: abs(v) <= tol * budget)
    alloc = response(math.exp(log_lam))
    return alloc * (budget / alloc.sum())


def equalize_budget(level_funcs, budget, lower_bounds, tol=1e-12):
    """Split ``budget`` to minimise ``max_n Q_n(B_n)`` for decreasing ``Q_n``.

    The optimum equalises the levels: for a target level ``q`` each channel
    takes the bandwidth that brings it down to ``q``; ``q`` is bisected in
    log-space until the bandwidths use the whole budget.
    """
    funcs = list(level_funcs)
    lb = np.asarray(lower_bounds, dtype=float)
    if lb.sum() >= budget:
        raise ValueError("lower bounds exhaust the budget")
    if len(funcs) == 1:
        return np.array([float(budget)])
    ub = budget - (lb.sum() - lb)

    def inverse(n, log_q):
        q = math.exp(log_q)
        f = funcs[n]
        if f(lb[n]) <= q:
            return lb[n]
        if f(ub[n]) >= q:
            return ub[n]
        t = brentq(lambda lx: math.log(f(math.exp(lx))) - log_q,
                   math.log(lb[n]), math.log(ub[n]), xtol=1e-15, rtol=8.9e-16)
        return math.exp(t)

    def excess(log_q):
        return sum(inverse(n, log_q) for n in range(len(funcs))) - budget

    levels = [math.log(f(budget / len(funcs))) for f in funcs]
    lo, hi = min(levels), max(levels)
    while excess(lo) < 0:
        lo -= 1.0
    while excess(hi) > 0:
        hi += 1.0
    log_q = _solve_monotone(excess, lo, hi, lambda v: v == 0.0)
    alloc = np.array([inverse(n, log_q) for n in range(len(funcs))])
    return alloc * (budget / alloc.sum()) if abs(alloc.sum() - budget) > tol * budget else alloc


def hessian_2d(f, point, step):
    """Central-difference Hessian of ``f(x, y)``; ``step`` is a scalar or an (hx, hy) pair."""
    x, y = map(float, point)
    hx, hy = (step, step) if np.isscalar(step) else map(float, step)
    f0 = f(x, y)
    fxx = (f(x + hx, y) - 2 * f0 + f(x - hx, y)) / hx**2
    fyy = (f(x, y + hy) - 2 * f0 + f(x, y - hy)) / hy**2
    fxy = (f(x + hx, y + hy) - f(x + hx, y - hy)
           - f(x - hx, y + hy) + f(x - hx, y - hy)) / (4 * hx * hy)
    hess = np.array([[fxx, fxy], [fxy, fyy]])
    if not np.all(np.isfinite(hess)):
        raise NumericalError(f"non-finite Hessian at {point!r}")
    return hess


def hessian_psd_check(f, point, step=1e-4):
    """Return ``(min_eigenvalue, is_psd)`` of the numerical 2x2 Hessian.

    PSD is accepted when the smallest eigenvalue is at least
    ``-1e-6 * (1 + |largest|)``.
    """
    eig = np.linalg.eigvalsh(hessian_2d(f, point, step))
    lo, hi = float(eig[0]), float(eig[-1])
    return lo, lo >= -1e-6 * (1.0 + abs(hi))
