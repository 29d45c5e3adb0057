"""Coverage measures ``V(W(d))``: volume, Gaussian probability, distances."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .box import Box
from .design import Ball, BoxFamily, ScaledSet
from .errors import UnsupportedError, UsageError

MEASURE_KINDS = ("volume", "gaussian-probability", "min-dist-to-bad", "max-dist-to-bad", "radius")

#: Gauss-Legendre nodes per axis for Gaussian mass of balls and polytopes.
QUADRATURE_NODES = 48

_SQRT_PI = math.sqrt(math.pi)
_SQRT2 = math.sqrt(2.0)
# erf series below this argument, continued fraction above
_ERF_SWITCH = 3.0


def _erf_series(z):
    # erf(z) = 2/sqrt(pi) exp(-z^2) sum 2^n z^(2n+1) / (2n+1)!!, all terms positive
    z2 = z * z
    term = z
    total = z
    n = 0
    while term > 1e-17 * total:
        n += 1
        term *= 2.0 * z2 / (2 * n + 1)
        total += term
    return 2.0 / _SQRT_PI * math.exp(-z2) * total


def _erfc_cf(z):
    # erfc(z) = exp(-z^2)/sqrt(pi) / (z + (1/2)/(z + 1/(z + (3/2)/(z + ...))))
    # evaluated with the modified Lentz algorithm, z >= _ERF_SWITCH
    tiny = 1e-300
    f = z
    C = z
    D = 0.0
    for k in range(1, 500):
        a = 0.5 * k
        D = z + a * D
        D = 1.0 / (D if D != 0.0 else tiny)
        C = z + a / C
        if C == 0.0:
            C = tiny
        delta = C * D
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return math.exp(-z * z) / _SQRT_PI / f


def std_normal_cdf(t):
    """Standard normal distribution function ``P(u <= t)``.

    Uses the positive-term power series of erf for ``|t| < 3 sqrt(2)`` and
    the Laplace continued fraction of erfc beyond; absolute error is below
    ``1e-15`` on the whole line.  The result is clamped to ``[0, 1]``.
    """
    t = float(t)
    if math.isnan(t):
        raise UsageError("std_normal_cdf argument is NaN")
    if t == 0.0:
        return 0.5
    z = abs(t) / _SQRT2
    if z < _ERF_SWITCH:
        half = 0.5 * _erf_series(z)
        p = 0.5 + half if t > 0 else 0.5 - half
    elif z > 40.0:
        p = 1.0 if t > 0 else 0.0
    else:
        tail = 0.5 * _erfc_cf(z)
        p = 1.0 - tail if t > 0 else tail
    return min(1.0, max(0.0, p))


def _interval_mass(lo, hi, mu, sigma, signed=False):
    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    if b <= a and not signed:
        return 0.0
    if min(a, b) > 0:
        # upper tail: subtract survival functions to keep precision
        return std_normal_cdf(-a) - std_normal_cdf(-b)
    return std_normal_cdf(b) - std_normal_cdf(a)


@dataclass(frozen=True)
class MeasureSpec:
    """Which coverage functional is maximised.

    ``radius`` is the design scalar itself (ball radius or polytope scale);
    it orders sets exactly like their volume whenever that volume is
    positive and is used by the robustness radii.
    """

    kind: str = "volume"
    mean: np.ndarray | None = None
    sigma: np.ndarray | None = None
    bad_points: np.ndarray | None = None
    bad_box: Box | None = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in MEASURE_KINDS:
            raise UsageError(f"unknown measure kind {self.kind!r}")
        if self.kind == "gaussian-probability":
            if self.mean is None or self.sigma is None:
                raise UsageError("gaussian measure needs mean and sigma")
            mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
            sigma = np.atleast_1d(np.asarray(self.sigma, dtype=float))
            if mean.shape != sigma.shape:
                raise UsageError("mean and sigma must have the same length")
            if not (sigma > 0).all():
                raise UsageError(f"sigma components must be > 0, got {sigma}")
            object.__setattr__(self, "mean", mean)
            object.__setattr__(self, "sigma", sigma)
        if self.kind in ("min-dist-to-bad", "max-dist-to-bad"):
            if self.bad_points is None and self.bad_box is None:
                raise UsageError("distance measures need a bad set")
            if self.bad_points is not None:
                pts = np.atleast_2d(np.asarray(self.bad_points, dtype=float))
                if pts.size == 0:
                    raise UsageError("bad set must be nonempty")
                object.__setattr__(self, "bad_points", pts)

    @classmethod
    def gaussian(cls, mean, sigma):
        return cls("gaussian-probability", mean=mean, sigma=sigma)

    def distance(self, u):
        """Euclidean distance from ``u`` to the bad set."""
        if self.bad_box is not None:
            gap = np.maximum(np.maximum(self.bad_box.lo - u, u - self.bad_box.hi), 0.0)
            return float(np.linalg.norm(gap))
        return float(np.min(np.linalg.norm(self.bad_points - u, axis=1)))

    def to_json(self):
        out = {"kind": self.kind, "params": {}}
        if self.kind == "gaussian-probability":
            out["params"] = {"mean": self.mean.tolist(), "sigma": self.sigma.tolist()}
        elif self.kind.endswith("dist-to-bad"):
            if self.bad_points is not None:
                out["params"]["points"] = self.bad_points.tolist()
            else:
                out["params"]["box"] = self.bad_box.to_json()
        return out


def _gauss_density(points, mean, sigma):
    z = (points - mean) / sigma
    return np.prod(np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi)), axis=-1)


def _ball_gaussian(center, rho, mean, sigma, n):
    m = center.size
    x, w = np.polynomial.legendre.leggauss(n)
    r = 0.5 * rho * (x + 1.0)
    wr = 0.5 * rho * w
    nth = 2 * n
    th = 2.0 * math.pi * np.arange(nth) / nth
    wth = 2.0 * math.pi / nth
    if m == 2:
        R, TH = np.meshgrid(r, th, indexing="ij")
        pts = center + np.stack([R * np.cos(TH), R * np.sin(TH)], axis=-1)
        dens = _gauss_density(pts, mean, sigma)
        return float(np.sum(dens * R * wr[:, None]) * wth)
    mu, wmu = x, w
    R, MU, TH = np.meshgrid(r, mu, th, indexing="ij")
    s = np.sqrt(1.0 - MU * MU)
    pts = center + np.stack([R * s * np.cos(TH), R * s * np.sin(TH), R * MU], axis=-1)
    dens = _gauss_density(pts, mean, sigma)
    weights = (wr[:, None, None] * R * R) * wmu[None, :, None] * wth
    return float(np.sum(dens * weights))


def _simplex_gaussian(simplex, mean, sigma, n):
    x, w = np.polynomial.legendre.leggauss(n)
    a = 0.5 * (x + 1.0)
    wa = 0.5 * w
    v0 = simplex[0]
    E = simplex[1:] - v0
    det = abs(float(np.linalg.det(E)))
    if simplex.shape[1] == 2:
        A, B = np.meshgrid(a, a, indexing="ij")
        y = (1 - B)[..., None] * E[0] + B[..., None] * E[1]
        pts = v0 + A[..., None] * y
        jac = A * det
        W = wa[:, None] * wa[None, :]
    else:
        A, B, C = np.meshgrid(a, a, a, indexing="ij")
        y = (1 - B)[..., None] * E[0] + B[..., None] * ((1 - C)[..., None] * E[1] + C[..., None] * E[2])
        pts = v0 + A[..., None] * y
        jac = A * A * B * det
        W = wa[:, None, None] * wa[None, :, None] * wa[None, None, :]
    return float(np.sum(_gauss_density(pts, mean, sigma) * jac * W))


def _gaussian_measure(spec, fam, d, box, signed=False):
    mean, sigma = spec.mean, spec.sigma
    if mean.size != fam.m:
        raise UsageError(f"gaussian has dimension {mean.size}, family has {fam.m}")
    if isinstance(fam, BoxFamily):
        lo, hi = fam.split(d)
        if box is not None:
            lo, hi = box.clip(lo), box.clip(hi)
        out = 1.0
        for i in range(fam.m):
            out *= _interval_mass(lo[i], hi[i], mean[i], sigma[i], signed)
        return out
    if isinstance(fam, Ball):
        rho = float(d[0])
        if rho <= 0:
            return 0.0
        if fam.m == 1:
            c = fam.center[0]
            return _interval_mass(c - rho, c + rho, mean[0], sigma[0])
        return _ball_gaussian(fam.center, rho, mean, sigma, QUADRATURE_NODES)
    if isinstance(fam, ScaledSet):
        alpha = float(d[0])
        if alpha <= 0 or not fam.full_dimensional:
            return 0.0
        if fam.m == 1:
            lo = fam.anchor[0] + alpha * fam.z_lo[0]
            hi = fam.anchor[0] + alpha * fam.z_hi[0]
            return _interval_mass(lo, hi, mean[0], sigma[0])
        nodes = QUADRATURE_NODES if fam.m == 2 else 32
        return sum(
            _simplex_gaussian(fam.anchor + alpha * s, mean, sigma, nodes) for s in fam.simplices
        )
    raise UnsupportedError(f"gaussian measure not available for {fam!r}")


def measure(spec, fam, d, box=None, grid=64, strict=True):
    """Evaluate ``V(W(d))`` for the given measure specification.

    With ``strict=False`` the design point is not validated and boxes with
    ``lo > hi`` get a signed (negative) volume or mass, which keeps the
    value continuous for the solver's local search.
    """
    if strict:
        d = fam.check(d)
    else:
        d = np.asarray(d, dtype=float)
    kind = spec.kind
    if kind == "volume":
        if isinstance(fam, BoxFamily):
            if box is not None:
                d = np.concatenate([box.clip(fam.split(d)[0]), box.clip(fam.split(d)[1])])
            if not strict:
                lo, hi = fam.split(d)
                return float(np.prod(hi - lo))
        return fam.volume(d)
    if kind == "radius":
        if isinstance(fam, BoxFamily):
            raise UnsupportedError("radius measure needs a ball or scaled-set family")
        return float(d[0])
    if kind == "gaussian-probability":
        return _gaussian_measure(spec, fam, d, box, signed=not strict)
    convex_dist = spec.bad_box is not None
    if kind == "max-dist-to-bad":
        flag = "convex-in-u" if convex_dist else "general"
        return fam.maximize(d, spec.distance, flag, box, grid).value
    # min-dist-to-bad
    return -fam.maximize(d, lambda u: -spec.distance(u), "general", box, grid).value
