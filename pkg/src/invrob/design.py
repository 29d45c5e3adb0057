"""Finite-dimensional coverage-set families ``d -> W(d)``.

Every family maps a design point ``d`` to a closed set ``W(d)`` in scenario
space and knows three things about it: exact membership (through a
continuous function ``delta(d, u)`` that is ``<= 0`` exactly on ``W(d)``),
how to maximise a scalar function over it, and its geometry.

Members of ``W(d)`` are also addressed through a *reference set* ``T`` that
does not depend on ``d``: ``u = transform(d, t)`` for ``t`` in ``T``.  The
solver stores cutting scenarios as reference points, which turns the
moving index set ``W(d)`` into a fixed one.

==========  ==============  ===========================  ==================
kind        design ``d``    ``W(d)``                     reference ``T``
==========  ==============  ===========================  ==================
interval1d  ``(lo, hi)``    ``[lo, hi]``                 ``[0, 1]``
box         ``(lo.., hi..)`` ``prod [lo_i, hi_i]``       ``[0, 1]^m``
ball        ``(rho,)``      ``{|u - c| <= rho}``         unit ball
scaled-set  ``(alpha,)``    ``a + alpha * Z``            ``Z``
==========  ==============  ===========================  ==================
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls
from scipy.spatial import ConvexHull, QhullError

from .box import Box
from .errors import DomainError, UnsupportedError, UsageError

FLAGS = ("convex-in-u", "monotone-in-u", "general")

#: Default grid points per axis for general-flag inner maximisation.
DEFAULT_GRID = 64

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class InnerMax:
    """Result of maximising a scalar function over ``W(d)``."""

    value: float
    witness: np.ndarray
    reference: np.ndarray


def golden_max(fun, a, b, tol):
    """Golden-section search for the maximum of ``fun`` on ``[a, b]``."""
    c = b - _GOLDEN * (b - a)
    e = a + _GOLDEN * (b - a)
    fc, fe = fun(c), fun(e)
    while b - a > tol:
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, e, fe
            e = a + _GOLDEN * (b - a)
            fe = fun(e)
    return (c, fc) if fc >= fe else (e, fe)


def _grid_refine(evaluate, k, grid, s_tol, periodic=()):
    """Maximise ``evaluate(s)`` over ``s`` in ``[0, 1]^k``.

    Tensor grid with ``grid`` points per axis, then coordinate-wise golden
    refinement inside the best grid cell.  ``evaluate`` may return ``-inf``
    for parameters that fall outside the feasible region.
    """
    axes = []
    for i in range(k):
        if i in periodic:
            axes.append(np.arange(grid) / grid)
        else:
            axes.append(np.linspace(0.0, 1.0, grid))
    best_val, best_s = -math.inf, None
    for idx in itertools.product(*axes):
        s = np.array(idx)
        v = evaluate(s)
        if v > best_val:
            best_val, best_s = v, s
    if best_s is None:
        return best_val, None
    h = 1.0 / max(grid - 1, 1)
    for _ in range(max(1, k)):
        improved = False
        for i in range(k):
            if i in periodic:
                a, b = best_s[i] - h, best_s[i] + h
            else:
                a, b = max(0.0, best_s[i] - h), min(1.0, best_s[i] + h)
            if b <= a:
                continue
            base = best_s.copy()

            def along(si, base=base, i=i):
                s = base.copy()
                s[i] = si
                return evaluate(s)

            si, v = golden_max(along, a, b, s_tol)
            if v > best_val:
                best_val = v
                best_s = base.copy()
                best_s[i] = si
                improved = True
        if not improved:
            break
    return best_val, best_s


class DesignFamily:
    """Common interface of the shipped coverage-set families."""

    kind = ""
    m = 0  # scenario dimension
    l = 0  # design dimension

    # -- design points -------------------------------------------------
    def check(self, d):
        d = np.atleast_1d(np.asarray(d, dtype=float)).reshape(-1)
        if d.size != self.l:
            raise UsageError(f"{self.kind} design point needs {self.l} entries, got {d.size}")
        if not np.isfinite(d).all():
            raise UsageError(f"design point must be finite, got {d}")
        self._check_feasible(d)
        return d

    def _check_feasible(self, d):
        pass

    def _check_u(self, u):
        u = np.atleast_1d(np.asarray(u, dtype=float)).reshape(-1)
        if u.size != self.m:
            raise UsageError(f"scenario must have dimension {self.m}, got {u.size}")
        return u

    def design_rows(self, d):
        """Extra design-feasibility rows ``<= 0`` beyond the variable bounds."""
        return np.empty(0)

    def shrink(self, d, d0, lam):
        """Point on the segment from ``d0`` (``lam = 0``) to ``d`` (``lam = 1``)."""
        return d0 + lam * (d - d0)

    # -- membership -----------------------------------------------------
    def delta(self, d, u):
        raise NotImplementedError

    def contains(self, d, u, tol=0.0):
        d = self.check(d)
        return bool(self.delta(d, self._check_u(u)) <= tol)

    # -- maximisation ---------------------------------------------------
    def maximize(self, d, phi, flag="general", box=None, grid=DEFAULT_GRID, tol=1e-10):
        raise NotImplementedError

    def _finish(self, d, phi, cands, box):
        """Pick the best of explicit reference candidates."""
        best = None
        for t in cands:
            u = self.transform(d, t)
            if box is not None and not box.contains(u, 1e-12):
                continue
            v = float(phi(u))
            if best is None or v > best.value:
                best = InnerMax(v, u, np.asarray(t, dtype=float))
        if best is None:
            raise DomainError(f"W(d) does not meet the uncertainty box for d={d}")
        return best


class BoxFamily(DesignFamily):
    """Axis-aligned boxes ``[lo, hi]`` in ``R^m``."""

    kind = "box"

    def __init__(self, m):
        if int(m) < 1:
            raise UsageError("box family needs m >= 1")
        self.m = int(m)
        self.l = 2 * self.m

    def __repr__(self):
        return f"BoxFamily(m={self.m})"

    def split(self, d):
        return d[: self.m], d[self.m :]

    def _check_feasible(self, d):
        lo, hi = self.split(d)
        if (lo > hi + 1e-9).any():
            raise UsageError(f"infeasible {self.kind} design point: lo > hi in {d}")

    def design_rows(self, d):
        lo, hi = self.split(d)
        return lo - hi

    def design_bounds(self, box):
        return np.concatenate([box.lo, box.lo]), np.concatenate([box.hi, box.hi])

    def minimal_design(self, points):
        points = np.atleast_2d(points)
        return np.concatenate([points.min(axis=0), points.max(axis=0)])

    def delta(self, d, u):
        lo, hi = self.split(d)
        return float(np.max(np.maximum(lo - u, u - hi)))

    def transform(self, d, t):
        lo, hi = self.split(d)
        t = np.asarray(t, dtype=float)
        # convex combination: exact at both vertices
        return (1.0 - t) * lo + t * np.maximum(hi, lo)

    def reference_vertices(self):
        return [np.array(v, dtype=float) for v in itertools.product((0.0, 1.0), repeat=self.m)]

    def clip_to_box(self, d, box):
        d = self.check(d)
        lo, hi = self.split(d)
        lo2, hi2 = box.clip(lo), box.clip(hi)
        return np.concatenate([lo2, hi2]), bool((lo2 != lo).any() or (hi2 != hi).any())

    def volume(self, d):
        lo, hi = self.split(d)
        return float(np.prod(np.maximum(hi - lo, 0.0)))

    def maximize(self, d, phi, flag="general", box=None, grid=DEFAULT_GRID, tol=1e-10):
        d = self.check(d)
        if box is not None:
            d, _ = self.clip_to_box(d, box)
        if flag not in FLAGS:
            raise UsageError(f"unknown convexity flag {flag!r}")
        if flag != "general":
            # convex or coordinate-monotone functions peak at a vertex
            return self._finish(d, phi, self.reference_vertices(), None)
        lo, hi = self.split(d)
        width = float(np.max(hi - lo))
        if width <= 0.0:
            return self._finish(d, phi, [np.zeros(self.m)], None)

        val, s = _grid_refine(lambda s: float(phi(self.transform(d, s))), self.m, grid, tol / width)
        return InnerMax(val, self.transform(d, s), s)

    def sample(self, d, n, rng):
        lo, hi = self.split(self.check(d))
        return lo + rng.random((n, self.m)) * (hi - lo)

    def audit_points(self, d, n):
        lo, hi = self.split(self.check(d))
        axes = [np.linspace(lo[i], hi[i], n) for i in range(self.m)]
        return np.array(list(itertools.product(*axes)))


class Interval1D(BoxFamily):
    """Intervals ``[d1, d2]`` on the real line."""

    kind = "interval1d"

    def __init__(self):
        super().__init__(1)

    def __repr__(self):
        return "Interval1D()"


def _unit_ball_volume(m):
    return math.pi ** (m / 2.0) / math.gamma(m / 2.0 + 1.0)


def _sphere_point(angles):
    """Map angle parameters in ``[0, 1]^(m-1)`` to the unit sphere in ``R^m``."""
    if angles.size == 1:
        th = 2.0 * math.pi * angles[0]
        return np.array([math.cos(th), math.sin(th)])
    th = 2.0 * math.pi * angles[0]
    ps = math.pi * angles[1]
    return np.array([math.sin(ps) * math.cos(th), math.sin(ps) * math.sin(th), math.cos(ps)])


class Ball(DesignFamily):
    """Euclidean balls ``B_rho(c)`` around a fixed centre."""

    kind = "ball"

    def __init__(self, center):
        center = np.atleast_1d(np.asarray(center, dtype=float)).reshape(-1)
        if center.size > 3:
            raise UnsupportedError("ball family supports m <= 3")
        self.center = center
        self.m = center.size
        self.l = 1

    def __repr__(self):
        return f"Ball(center={self.center.tolist()})"

    def _check_feasible(self, d):
        if d[0] < -1e-12:
            raise UsageError(f"ball radius must be >= 0, got {d[0]}")

    def design_bounds(self, box):
        reach = float(np.min(np.minimum(self.center - box.lo, box.hi - self.center)))
        return np.array([0.0]), np.array([max(reach, 0.0)])

    def minimal_design(self, points):
        points = np.atleast_2d(points)
        return np.array([float(np.max(np.linalg.norm(points - self.center, axis=1)))])

    def delta(self, d, u):
        return float(np.linalg.norm(u - self.center) - d[0])

    def transform(self, d, t):
        return self.center + max(d[0], 0.0) * np.asarray(t, dtype=float)

    def clip_to_box(self, d, box):
        d = self.check(d)
        lo = self.center - d[0]
        hi = self.center + d[0]
        return d, not (box.contains(lo) and box.contains(hi))

    def volume(self, d):
        return _unit_ball_volume(self.m) * max(d[0], 0.0) ** self.m

    def _reference(self, s, boundary):
        if self.m == 1:
            return np.array([2.0 * s[0] - 1.0])
        if boundary:
            return _sphere_point(s)
        return s[0] * _sphere_point(s[1:])

    def maximize(self, d, phi, flag="general", box=None, grid=DEFAULT_GRID, tol=1e-10):
        d = self.check(d)
        if flag not in FLAGS:
            raise UsageError(f"unknown convexity flag {flag!r}")
        rho = d[0]
        truncated = box is not None and self.clip_to_box(d, box)[1]
        if rho <= 0.0:
            return self._finish(d, phi, [np.zeros(self.m)], box)
        boundary = flag != "general" and not truncated
        if self.m == 1 and boundary:
            return self._finish(d, phi, [np.array([-1.0]), np.array([1.0])], None)

        def evaluate(s):
            t = self._reference(s, boundary)
            u = self.transform(d, t)
            if box is not None and not box.contains(u, 1e-12):
                return -math.inf
            return float(phi(u))

        if self.m == 1:
            k, periodic = 1, ()
        elif boundary:
            k, periodic = self.m - 1, (0,)
        else:
            k, periodic = self.m, (1,)
        val, s = _grid_refine(evaluate, k, grid, tol / (2.0 * math.pi * rho + 1.0), periodic)
        if s is None:
            raise DomainError(f"W(d) does not meet the uncertainty box for d={d}")
        t = self._reference(s, boundary)
        best = InnerMax(val, self.transform(d, t), t)
        if not boundary:
            centre = self._finish(d, phi, [np.zeros(self.m)], box) if box is None or box.contains(self.center) else None
            if centre is not None and centre.value > best.value:
                best = centre
        return best

    def sample(self, d, n, rng):
        rho = self.check(d)[0]
        g = rng.standard_normal((n, self.m))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        r = rng.random(n) ** (1.0 / self.m)
        return self.center + rho * r[:, None] * g

    def audit_points(self, d, n):
        rho = self.check(d)[0]
        if self.m == 1:
            return (self.center + np.linspace(-rho, rho, 2 * n + 1))[:, None]
        pts = [self.center]
        radii = np.linspace(0.0, 1.0, n + 1)[1:]
        if self.m == 2:
            for th in np.arange(4 * n) / (4 * n):
                for r in radii:
                    pts.append(self.center + rho * r * _sphere_point(np.array([th])))
        else:
            for th in np.arange(2 * n) / (2 * n):
                for ps in np.linspace(0.0, 1.0, n + 1):
                    for r in radii:
                        pts.append(self.center + rho * r * _sphere_point(np.array([th, ps])))
        return np.array(pts)


class ScaledSet(DesignFamily):
    """Scaled polytopes ``a + alpha * Z`` with ``Z`` given by its vertices.

    ``Z`` may be lower dimensional (including a single point); such sets
    have zero volume and membership is decided by a non-negative least
    squares fit of convex weights instead of the halfspace form.
    """

    kind = "scaled-set"

    def __init__(self, anchor, vertices):
        anchor = np.atleast_1d(np.asarray(anchor, dtype=float)).reshape(-1)
        V = np.atleast_2d(np.asarray(vertices, dtype=float))
        if V.shape[1] != anchor.size:
            raise UsageError(f"vertices have dimension {V.shape[1]}, anchor has {anchor.size}")
        if anchor.size > 3:
            raise UnsupportedError("scaled-set family supports m <= 3")
        if not np.isfinite(V).all():
            raise UsageError("polytope vertices must be finite")
        self.anchor = anchor
        self.m = anchor.size
        self.l = 1
        self.scale = max(float(np.max(np.abs(V))), 1.0)
        self.equations = None
        self.simplices = []
        self.z_volume = 0.0
        if self.m == 1:
            lo, hi = float(V.min()), float(V.max())
            self.vertices = np.unique(np.array([[lo], [hi]]), axis=0)
            if hi > lo:
                self.equations = np.array([[1.0, -hi], [-1.0, lo]])
                self.z_volume = hi - lo
                self.simplices = [np.array([[lo], [hi]])]
        else:
            try:
                hull = ConvexHull(V)
            except (QhullError, ValueError):
                hull = None
            if hull is None:
                self.vertices = np.unique(V, axis=0)
            else:
                self.vertices = V[hull.vertices]
                self.equations = hull.equations
                self.z_volume = float(hull.volume)
                centroid = self.vertices.mean(axis=0)
                if self.m == 2:
                    ring = V[hull.vertices]  # counter-clockwise for 2-D hulls
                    for i in range(len(ring)):
                        self.simplices.append(np.array([centroid, ring[i], ring[(i + 1) % len(ring)]]))
                else:
                    for facet in hull.simplices:
                        self.simplices.append(np.vstack([centroid, V[facet]]))
        self.full_dimensional = self.equations is not None
        self.z_lo = self.vertices.min(axis=0)
        self.z_hi = self.vertices.max(axis=0)

    def __repr__(self):
        return f"ScaledSet(anchor={self.anchor.tolist()}, vertices={self.vertices.tolist()})"

    def _check_feasible(self, d):
        if d[0] < -1e-12:
            raise UsageError(f"scale must be >= 0, got {d[0]}")

    def in_z(self, z, tol=1e-12):
        z = np.asarray(z, dtype=float)
        if self.full_dimensional:
            return bool(np.all(self.equations[:, :-1] @ z + self.equations[:, -1] <= tol * self.scale))
        return self._hull_distance(z) <= tol * self.scale

    def _hull_distance(self, z):
        A = np.vstack([self.vertices.T, np.ones(len(self.vertices)) * 1e3])
        b = np.concatenate([z, [1e3]])
        _, res = nnls(A, b)
        return float(res)

    def design_bounds(self, box):
        caps = []
        for v in self.vertices:
            for i in range(self.m):
                if v[i] > 0:
                    caps.append((box.hi[i] - self.anchor[i]) / v[i])
                elif v[i] < 0:
                    caps.append((box.lo[i] - self.anchor[i]) / v[i])
        cap = min(caps) if caps else float(np.max(box.hi - box.lo))
        return np.array([0.0]), np.array([max(cap, 0.0)])

    def minimal_design(self, points):
        points = np.atleast_2d(points) - self.anchor
        need = 0.0
        for p in points:
            if not np.any(p):
                continue
            if not self.full_dimensional:
                raise UsageError("nominal scenarios must equal the anchor for a degenerate polytope")
            for row in self.equations:
                lhs = float(row[:-1] @ p)
                if lhs <= 0:
                    continue
                if row[-1] >= 0:
                    raise UsageError("nominal scenario cannot be covered: 0 is not interior to Z")
                need = max(need, lhs / -row[-1])
        return np.array([need])

    def delta(self, d, u):
        alpha = d[0]
        w = u - self.anchor
        if self.full_dimensional:
            return float(np.max(self.equations[:, :-1] @ w + alpha * self.equations[:, -1]))
        if alpha <= 0:
            return float(np.linalg.norm(w))
        return alpha * self._hull_distance(w / alpha)

    def transform(self, d, t):
        return self.anchor + max(d[0], 0.0) * np.asarray(t, dtype=float)

    def clip_to_box(self, d, box):
        d = self.check(d)
        corners = self.anchor + d[0] * self.vertices
        return d, not all(box.contains(c) for c in corners)

    def volume(self, d):
        return float(max(d[0], 0.0) ** self.m * self.z_volume)

    def maximize(self, d, phi, flag="general", box=None, grid=DEFAULT_GRID, tol=1e-10):
        d = self.check(d)
        if flag not in FLAGS:
            raise UsageError(f"unknown convexity flag {flag!r}")
        verts = list(self.vertices)
        truncated = box is not None and self.clip_to_box(d, box)[1]
        if d[0] <= 0.0:
            return self._finish(d, phi, [self.vertices[0]], box)
        if flag == "convex-in-u" and not truncated:
            return self._finish(d, phi, verts, None)
        vertex_best = self._finish(d, phi, verts, box) if any(
            box is None or box.contains(self.transform(d, v)) for v in verts) else None
        if not self.full_dimensional:
            cands = verts + [
                (1 - s) * a + s * b
                for a, b in itertools.combinations(verts, 2)
                for s in np.linspace(0.0, 1.0, grid)[1:-1]
            ]
            return self._finish(d, phi, cands, box)
        span = self.z_hi - self.z_lo

        def evaluate(s):
            z = self.z_lo + s * span
            if not self.in_z(z):
                return -math.inf
            u = self.transform(d, z)
            if box is not None and not box.contains(u, 1e-12):
                return -math.inf
            return float(phi(u))

        val, s = _grid_refine(evaluate, self.m, grid, tol / (d[0] * float(np.max(span)) + 1.0))
        best = vertex_best
        if s is not None:
            z = self.z_lo + s * span
            if best is None or val > best.value:
                best = InnerMax(val, self.transform(d, z), z)
        if best is None:
            raise DomainError(f"W(d) does not meet the uncertainty box for d={d}")
        return best

    def sample(self, d, n, rng):
        alpha = self.check(d)[0]
        w = rng.dirichlet(np.ones(len(self.vertices)), size=n)
        return self.anchor + alpha * (w @ self.vertices)

    def audit_points(self, d, n):
        alpha = self.check(d)[0]
        pts = [self.anchor + alpha * v for v in self.vertices]
        for a, b in itertools.combinations(self.vertices, 2):
            for s in np.linspace(0.0, 1.0, n)[1:-1]:
                pts.append(self.anchor + alpha * ((1 - s) * a + s * b))
        if self.full_dimensional:
            axes = [np.linspace(self.z_lo[i], self.z_hi[i], n) for i in range(self.m)]
            for z in itertools.product(*axes):
                z = np.array(z)
                if self.in_z(z):
                    pts.append(self.anchor + alpha * z)
        return np.array(pts)


def make_family(kind, **params):
    """Build a family from its declarative name and parameters."""
    if kind == "interval1d":
        return Interval1D()
    if kind == "box":
        return BoxFamily(params.get("m", 1))
    if kind == "ball":
        return Ball(params["center"])
    if kind == "scaled-set":
        return ScaledSet(params["anchor"], params["vertices"])
    raise UsageError(f"unknown design family {kind!r}")


def family_params(fam):
    """Inverse of :func:`make_family` for serialisation."""
    if isinstance(fam, Interval1D):
        return {}
    if isinstance(fam, BoxFamily):
        return {"m": fam.m}
    if isinstance(fam, Ball):
        return {"center": fam.center.tolist()}
    if isinstance(fam, ScaledSet):
        return {"anchor": fam.anchor.tolist(), "vertices": fam.vertices.tolist()}
    raise UsageError(f"cannot serialise {fam!r}")


def contains(fam, d, u):
    """Exact membership test ``u in W(d)``."""
    return fam.contains(d, u)


def inner_max(fam, d, phi, flag="general", box=None, grid=DEFAULT_GRID):
    """Supremum of ``phi`` over ``W(d)`` (intersected with ``box``) and a witness.

    Returns ``(value, witness)``.  Convex or monotone functions on boxes are
    evaluated at the vertices only, which is exact; general functions get a
    tensor grid plus golden-section refinement.
    """
    res = fam.maximize(d, phi, flag, box, grid)
    return res.value, res.witness


def clip_to_box(fam, d, box):
    """Design point describing ``W(d) ∩ box``; second value flags truncation."""
    return fam.clip_to_box(d, box)
