"""Axis-aligned boxes used for decision, uncertainty and search regions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UsageError

#: Half-width substituted for unbounded uncertainty axes.
DEFAULT_MARGIN = 12.0


@dataclass(frozen=True)
class Box:
    """Closed box ``[lo, hi]``; infinite bounds are allowed until searched."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size == 0:
            raise UsageError(f"box bounds must be equal-length vectors, got {lo.shape} and {hi.shape}")
        if np.isnan(lo).any() or np.isnan(hi).any():
            raise UsageError("box bounds must not be NaN")
        if (lo > hi).any():
            raise UsageError(f"box has lo > hi: {lo} > {hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def cube(cls, dim, lo, hi):
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @property
    def dim(self):
        return self.lo.size

    @property
    def is_bounded(self):
        return bool(np.isfinite(self.lo).all() and np.isfinite(self.hi).all())

    def contains(self, u, tol=0.0):
        u = np.asarray(u, dtype=float)
        return bool(((u >= self.lo - tol) & (u <= self.hi + tol)).all())

    def bounded(self, margin=DEFAULT_MARGIN):
        """Replace infinite bounds by ``-margin`` / ``+margin``."""
        if not math.isfinite(margin) or margin <= 0:
            raise UsageError(f"margin must be a positive finite number, got {margin}")
        lo = np.where(np.isfinite(self.lo), self.lo, -margin)
        hi = np.where(np.isfinite(self.hi), self.hi, margin)
        return Box(lo, np.maximum(hi, lo))

    def clip(self, u):
        return np.clip(u, self.lo, self.hi)

    def to_json(self):
        def enc(v):
            return [None if not math.isfinite(a) else float(a) for a in v]

        return {"lo": enc(self.lo), "hi": enc(self.hi)}
