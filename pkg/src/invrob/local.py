"""Deterministic derivative-free search used by the solvers.

All searches run in normalised coordinates ``s = (z - lo) / (hi - lo)`` so
step sizes are fractions of each axis range.  Axes with ``lo == hi`` are
held fixed.
"""

from __future__ import annotations

import itertools
import math
import warnings

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc


def start_points(lo, hi, per_axis, cap):
    """Tensor grid of ``per_axis`` points per free axis, or a Halton set.

    The tensor grid is used while it has at most ``cap`` points; beyond that
    an unscrambled Halton sequence of ``cap`` points keeps the start set
    deterministic.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    free = np.flatnonzero(hi > lo)
    if free.size == 0:
        return lo[None, :].copy()
    if per_axis ** free.size <= cap:
        axes = [np.linspace(0.0, 1.0, per_axis) for _ in free]
        unit = np.array(list(itertools.product(*axes)))
    else:
        unit = qmc.Halton(d=free.size, scramble=False).random(cap + 1)[1:]
    pts = np.repeat(lo[None, :], len(unit), axis=0)
    pts[:, free] = lo[free] + unit * (hi[free] - lo[free])
    return pts


class Scaler:
    """Map between box coordinates and the unit cube of the free axes."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.free = np.flatnonzero(self.hi > self.lo)
        self.width = self.hi - self.lo

    def to_unit(self, z):
        return (np.asarray(z, dtype=float)[self.free] - self.lo[self.free]) / self.width[self.free]

    def from_unit(self, s):
        z = self.lo.copy()
        z[self.free] = self.lo[self.free] + np.clip(s, 0.0, 1.0) * self.width[self.free]
        return z


def pattern_search(key, z0, lo, hi, step=0.25, shrink=0.5, step_tol=1e-9, max_evals=20000):
    """Coordinate search minimising a lexicographic ``key(z)``.

    Tries ``+step`` and ``-step`` along every free axis, accepting the first
    improvement; when a full sweep fails the step is multiplied by
    ``shrink``.  Stops once the step drops below ``step_tol``.
    """
    sc = Scaler(lo, hi)
    if sc.free.size == 0:
        z = sc.from_unit(np.empty(0))
        return z, key(z)
    s = np.clip(sc.to_unit(z0), 0.0, 1.0)
    z = sc.from_unit(s)
    best = key(z)
    evals = 1
    free, base, width = sc.free, sc.lo, sc.width
    while step >= step_tol and evals < max_evals:
        improved = False
        for i in range(s.size):
            ax = free[i]
            for sign in (1.0, -1.0):
                si = min(1.0, max(0.0, s[i] + sign * step))
                if si == s[i]:
                    continue
                trial = z.copy()
                trial[ax] = base[ax] + si * width[ax]
                k = key(trial)
                evals += 1
                if k < best:
                    s[i], z, best = si, trial, k
                    improved = True
                    break
        if not improved:
            step *= shrink
    return z, best


def cobyla_polish(objective, rows, z0, lo, hi, rhobeg=0.05, rhoend=1e-10, maxiter=4000):
    """Minimise ``objective(z)`` subject to ``rows(z) <= 0`` with COBYLA.

    Returns the final point; the caller decides whether it beats ``z0``.
    """
    sc = Scaler(lo, hi)
    if sc.free.size == 0:
        return sc.from_unit(np.empty(0))
    cache = {}

    def point(s):
        k = s.tobytes()
        if k not in cache:
            cache.clear()
            z = sc.from_unit(s)
            cache[k] = (z, np.asarray(rows(z), dtype=float))
        return cache[k]

    def cons(s):
        return -point(s)[1]

    def fun(s):
        return objective(point(s)[0])

    s0 = np.clip(sc.to_unit(z0), 0.0, 1.0)
    bounds = [(0.0, 1.0)] * sc.free.size
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = minimize(
            fun,
            s0,
            method="COBYLA",
            bounds=bounds,
            constraints=[{"type": "ineq", "fun": cons}],
            options={"rhobeg": rhobeg, "tol": rhoend, "maxiter": maxiter},
        )
    s = np.clip(np.asarray(res.x, dtype=float), 0.0, 1.0)
    if not np.isfinite(s).all():
        return np.asarray(z0, dtype=float)
    return sc.from_unit(s)


def feasibility_key(viol, value, tol):
    """Rank by violation first (anything ``<= tol`` counts as feasible), then by ``-value``."""
    if math.isnan(viol):
        return (math.inf, -value)
    v = viol if viol > tol else 0.0
    return (v, -value)
