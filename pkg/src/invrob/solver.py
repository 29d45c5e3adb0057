"""Exchange (adaptive discretisation) solver for the semi-infinite problem

    max V(W(d))  over (x, d)
    s.t. f_{i,u}(x) <= rhs_i(x, u)   for u in Phi1(x, W(d)) and u in Ū
         g_{j,u}(x) <= 0             for u in Phi2(x, W(d)) and u in Ū
         Ū ⊆ W(d)

Cutting scenarios are stored as reference points ``t`` of the design
family, so a cut ``phi(x, transform(d, t)) <= 0`` moves with ``d`` and the
finite relaxation is an ordinary smooth program in ``(x, d)``.  Each round
solves the relaxation (multistart + coordinate search + COBYLA polish),
then maximises every constraint over the selected set and adds the worst
reference points until the incumbent is certified.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .design import BoxFamily
from .errors import EvaluationError, InfeasibleProblemError, InvRobError, NonConvergenceError, UsageError
from .local import cobyla_polish, feasibility_key, pattern_search, start_points
from .measures import measure
from .model import IDENTITY, budget_rhs, constraint_rows, row_violations

log = logging.getLogger(__name__)

_BAD = 1e30


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the exchange loop and its local searches (all deterministic)."""

    feasibility_tol: float = 1e-8
    exchange_max_rounds: int = 50
    multistart_grid: int = 9
    max_starts: int = 4096
    local_starts: int = 3
    step_fraction: float = 0.25
    step_shrink: float = 0.5
    step_tol: float = 1e-9
    scenario_pool_cap: int = 512
    inner_grid: int = 64
    polish: bool = True
    polish_rhobeg: float = 0.05
    polish_rhoend: float = 1e-10
    polish_maxiter: int = 4000
    active_tol: float = 1e-6
    workers: int = 1

    def __post_init__(self):
        for name in ("feasibility_tol", "step_fraction", "step_tol", "polish_rhobeg", "polish_rhoend"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be > 0")
        for name in ("exchange_max_rounds", "multistart_grid", "max_starts", "local_starts",
                     "scenario_pool_cap", "inner_grid", "workers"):
            if int(getattr(self, name)) < 1:
                raise UsageError(f"{name} must be >= 1")
        if not 0 < self.step_shrink < 1:
            raise UsageError("step_shrink must lie in (0, 1)")


@dataclass(frozen=True)
class RoundTrace:
    round: int
    x: np.ndarray
    d: np.ndarray
    max_violation: float
    V: float
    pool_size: int


@dataclass(frozen=True)
class ActiveConstraint:
    name: str
    cls: str
    witness: np.ndarray
    slack: float


@dataclass
class SolveResult:
    """Certified incumbent of the exchange loop."""

    x_star: np.ndarray
    d_star: np.ndarray
    V_star: float
    active_set: list
    rounds: int
    trace: list
    max_violation: float
    certified: bool = True
    truncated: bool = False
    violations: list = field(default_factory=list, repr=False)

    def to_json(self):
        return {
            "x_star": self.x_star.tolist(),
            "d_star": self.d_star.tolist(),
            "V_star": self.V_star,
            "rounds": self.rounds,
            "max_violation": self.max_violation,
            "certified": self.certified,
            "truncated": self.truncated,
            "active_set": [
                {"name": a.name, "class": a.cls, "witness": a.witness.tolist(), "slack": a.slack}
                for a in self.active_set
            ],
            "trace": [
                {"round": t.round, "x": t.x.tolist(), "d": t.d.tolist(),
                 "max_violation": t.max_violation, "V": t.V, "pool_size": t.pool_size}
                for t in self.trace
            ],
        }


class _Relaxation:
    """Finite relaxation of the semi-infinite program over a reference pool."""

    def __init__(self, prob, budget, selectors, fam, spec, cfg):
        if fam.m != prob.m:
            raise UsageError(f"family has dimension {fam.m}, problem has {prob.m}")
        if budget.p != prob.p:
            raise UsageError(f"budget has {budget.p} components, problem has {prob.p} objectives")
        self.prob, self.budget, self.selectors = prob, budget, tuple(selectors)
        self.fam, self.spec, self.cfg = fam, spec, cfg
        self.box = prob.search_box
        xbox = prob.decision_search_box
        dlo, dhi = fam.design_bounds(self.box)
        self.n = prob.n
        self.lo = np.concatenate([xbox.lo, dlo])
        self.hi = np.concatenate([xbox.hi, dhi])
        self.nominal = prob.nominal_scenarios
        self.d0 = np.clip(fam.minimal_design(self.nominal), dlo, dhi)
        self.pool = []
        self._starts = None

    def split(self, z):
        return z[: self.n], z[self.n :]

    def join(self, x, d):
        return np.concatenate([x, d])

    def value(self, z):
        try:
            return measure(self.spec, self.fam, self.split(z)[1], self.box, self.cfg.inner_grid, strict=False)
        except (EvaluationError, ArithmeticError, ValueError):
            return -_BAD

    def _nominal_rows(self, x):
        out = []
        for ubar in self.nominal:
            for i, f in enumerate(self.prob.objectives):
                out.append(f(x, ubar) - budget_rhs(self.budget, i, x, ubar))
            for g in self.prob.constraints:
                out.append(g(x, ubar))
        return out

    def rows(self, z):
        """All relaxation rows at ``z``; feasible iff every entry is ``<= 0``."""
        x, d = self.split(z)
        fam = self.fam
        try:
            out = list(fam.design_rows(d))
            out.extend(fam.delta(d, ubar) for ubar in self.nominal)
            out.extend(self._nominal_rows(x))
            if self.pool:
                phi1, phi2 = self.selectors
                sub1 = phi1.select(x, fam, d) if phi1.kind != "nominal-only" else None
                sub2 = phi2.select(x, fam, d) if phi2.kind != "nominal-only" else None
                for t in self.pool:
                    if sub1 is not None:
                        u = fam.transform(sub1, t)
                        for i, f in enumerate(self.prob.objectives):
                            out.append(f(x, u) - budget_rhs(self.budget, i, x, u))
                    if sub2 is not None:
                        u = fam.transform(sub2, t)
                        for g in self.prob.constraints:
                            out.append(g(x, u))
            arr = np.asarray(out, dtype=float)
        except (EvaluationError, ArithmeticError, ValueError, OverflowError):
            return np.array([_BAD])
        arr[~np.isfinite(arr)] = _BAD
        return arr

    def max_row(self, z):
        r = self.rows(z)
        return float(r.max()) if r.size else -math.inf

    def key(self, z):
        return feasibility_key(self.max_row(z), self.value(z), self.cfg.feasibility_tol)

    def starts(self):
        if self._starts is None:
            self._starts = start_points(self.lo, self.hi, self.cfg.multistart_grid, self.cfg.max_starts)
        return self._starts

    def solve(self, warm):
        cfg = self.cfg
        cands = [np.clip(w, self.lo, self.hi) for w in warm] + list(self.starts())
        keys = [self.key(z) for z in cands]
        order = sorted(range(len(cands)), key=lambda k: keys[k])
        chosen = []
        for k in order:
            if all(np.max(np.abs(cands[k] - c)) > 1e-12 for c in chosen):
                chosen.append(cands[k])
            if len(chosen) >= cfg.local_starts:
                break
        best_z, best_k = None, None
        for z0 in chosen:
            z1, k1 = pattern_search(
                self.key, z0, self.lo, self.hi, cfg.step_fraction, cfg.step_shrink, cfg.step_tol
            )
            trial = [(z1, k1)]
            if cfg.polish:
                z2 = cobyla_polish(
                    lambda z: -self.value(z), self.rows, z1, self.lo, self.hi,
                    cfg.polish_rhobeg, cfg.polish_rhoend, cfg.polish_maxiter,
                )
                trial.append((z2, self.key(z2)))
            for z, k in trial:
                if best_k is None or k < best_k:
                    best_z, best_k = z, k
        return best_z

    def restore(self, z, limit):
        """Shrink ``d`` toward the minimal nominal design until rows hold within ``limit``."""
        if self.max_row(z) <= limit:
            return z
        x, d = self.split(z)
        if self.max_row(self.join(x, self.d0)) > limit:
            return z
        lo, hi = 0.0, 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if self.max_row(self.join(x, self.fam.shrink(d, self.d0, mid))) <= limit:
                lo = mid
            else:
                hi = mid
        return self.join(x, self.fam.shrink(d, self.d0, lo))

    def certify(self, z):
        x, d = self.split(z)
        rows = constraint_rows(self.prob, self.budget, self.selectors, x)
        entries = row_violations(rows, x, self.fam, d, self.nominal, self.box, self.cfg.inner_grid)
        cover = max(self.fam.delta(d, ubar) for ubar in self.nominal)
        return entries, max(max(e.value for e in entries), cover)

    def add_references(self, entries, z):
        added = 0
        for e in entries:
            if e.reference is None or e.value <= self.cfg.feasibility_tol:
                continue
            t = np.asarray(e.reference, dtype=float)
            if any(np.max(np.abs(t - p)) <= 1e-12 for p in self.pool):
                continue
            self.pool.append(t)
            added += 1
        while len(self.pool) > self.cfg.scenario_pool_cap:
            self._evict(z)
        return added

    def _evict(self, z):
        # drop the pool member with the largest slack at the incumbent
        saved = self.pool
        slacks = []
        for t in saved:
            self.pool = [t]
            r = self.rows(z)
            base = len(r) - self._rows_per_reference()
            slacks.append(-float(np.max(r[base:])) if len(r) > base else math.inf)
        self.pool = saved
        del self.pool[int(np.argmax(slacks))]

    def _rows_per_reference(self):
        phi1, phi2 = self.selectors
        return (self.prob.p if phi1.kind != "nominal-only" else 0) + (
            self.prob.q if phi2.kind != "nominal-only" else 0
        )

    def nominal_start(self):
        """Decision closest to nominal feasibility, or raise if none exists."""
        cfg = self.cfg
        xbox = self.prob.decision_search_box

        def viol(x):
            try:
                vals = self._nominal_rows(x)
            except (EvaluationError, ArithmeticError, ValueError, OverflowError):
                return (_BAD,)
            v = max(vals) if vals else -math.inf
            return (max(v, 0.0) if math.isfinite(v) else _BAD,)

        pts = start_points(xbox.lo, xbox.hi, cfg.multistart_grid, cfg.max_starts)
        best = min(pts, key=viol)
        x, k = pattern_search(viol, best, xbox.lo, xbox.hi, cfg.step_fraction, cfg.step_shrink, cfg.step_tol)
        if k[0] > cfg.feasibility_tol:
            # thin feasible sets (a single point, say) need a constrained polish
            x2 = cobyla_polish(lambda x: 0.0, lambda x: np.asarray(self._nominal_rows(x), dtype=float),
                               x, xbox.lo, xbox.hi, cfg.polish_rhobeg, cfg.polish_rhoend, cfg.polish_maxiter)
            k2 = viol(x2)
            if k2 < k:
                x, k = x2, k2
        if k[0] > cfg.feasibility_tol:
            raise InfeasibleProblemError(
                f"no decision in the box satisfies the nominal scenarios (violation {k[0]:.3g})",
                violation=k[0], x=x,
            )
        return x


def _is_certified(prob, budget, selectors, spec):
    if any(s.kind == "custom" for s in selectors):
        return False
    if budget.varies_with_u:
        return False
    flags = list(prob.objective_flags) + list(prob.constraint_flags)
    if any(f == "general" for f in flags):
        return False
    return spec.kind in ("volume", "gaussian-probability", "radius")


def _truncated(fam, d, lo, hi):
    if isinstance(fam, BoxFamily):
        return bool(np.any(np.isclose(d, lo, atol=1e-9) & (np.arange(d.size) < fam.m))
                    or np.any(np.isclose(d, hi, atol=1e-9) & (np.arange(d.size) >= fam.m)))
    return bool(np.isclose(d[0], hi[0], atol=1e-9, rtol=1e-9))


def solve(prob, budget, selectors=(IDENTITY, IDENTITY), fam=None, spec=None, cfg=None, seeds=()):
    """Maximise the coverage measure of ``W(d)`` subject to the semi-infinite rows.

    Parameters
    ----------
    prob : UncertainProblem
    budget : BudgetSpec
    selectors : (Selector, Selector)
        Scenario selection for the budget rows and the feasibility rows.
    fam : DesignFamily
    spec : MeasureSpec
    cfg : SolverConfig, optional
    seeds : iterable of (x, d), optional
        Extra warm starts for the first relaxation.

    Raises
    ------
    InfeasibleProblemError
        No decision satisfies the nominal scenarios.
    NonConvergenceError
        Exchange rounds exhausted with a residual violation above tolerance.
    """
    cfg = cfg or SolverConfig()
    if fam is None or spec is None:
        raise UsageError("solve needs a design family and a measure")
    rel = _Relaxation(prob, budget, selectors, fam, spec, cfg)
    tol = cfg.feasibility_tol
    x_nom = rel.nominal_start()
    warm = [rel.join(x_nom, rel.d0)]
    for x, d in seeds:
        warm.append(rel.join(np.asarray(x, dtype=float).reshape(-1), np.asarray(d, dtype=float).reshape(-1)))
    trace = []
    best = None
    for rnd in range(1, cfg.exchange_max_rounds + 1):
        z = rel.solve(warm)
        z = rel.restore(z, 0.5 * tol)
        x, d = rel.split(z)
        d = _repair(fam, d)
        z = rel.join(x, d)
        entries, viol = rel.certify(z)
        V = measure(spec, fam, d, rel.box, cfg.inner_grid)
        trace.append(RoundTrace(rnd, x.copy(), d.copy(), viol, V, len(rel.pool)))
        log.debug("round %d: V=%.10g violation=%.3g pool=%d", rnd, V, viol, len(rel.pool))
        if best is None or feasibility_key(viol, V, tol) < feasibility_key(best[2], best[3], tol):
            best = (x.copy(), d.copy(), viol, V, entries)
        if viol <= tol:
            return _result(rel, prob, budget, selectors, spec, z, entries, viol, V, rnd, trace)
        added = rel.add_references(entries, z)
        if added == 0:
            break
        warm = [z]
    x, d, viol, V, entries = best
    partial = _result(rel, prob, budget, selectors, spec, rel.join(x, d), entries, viol, V, len(trace), trace)
    raise NonConvergenceError(
        f"exchange loop stopped after {len(trace)} rounds with violation {viol:.3g}",
        best=partial, violation=viol,
    )


def _repair(fam, d):
    d = np.asarray(d, dtype=float).copy()
    if isinstance(fam, BoxFamily):
        lo, hi = fam.split(d)
        hi = np.maximum(hi, lo)
        return np.concatenate([lo, hi])
    d[0] = max(d[0], 0.0)
    return d


def _result(rel, prob, budget, selectors, spec, z, entries, viol, V, rounds, trace):
    x, d = rel.split(z)
    active = [
        ActiveConstraint(e.name, e.cls, np.asarray(e.witness, dtype=float), -e.value)
        for e in entries
        if e.value >= -rel.cfg.active_tol
    ]
    dlo, dhi = rel.lo[rel.n :], rel.hi[rel.n :]
    return SolveResult(
        x_star=x.copy(),
        d_star=d.copy(),
        V_star=V,
        active_set=active,
        rounds=rounds,
        trace=list(trace),
        max_violation=viol,
        certified=_is_certified(prob, budget, selectors, spec),
        truncated=_truncated(rel.fam, d, dlo, dhi),
        violations=list(entries),
    )


@dataclass
class GridCell:
    eps: np.ndarray
    result: SolveResult | None
    error: InvRobError | None = None

    @property
    def ok(self):
        return self.result is not None


def solve_grid(prob, budget, fam, spec, cfg=None, eps_grid=(), selectors=(IDENTITY, IDENTITY),
               seed_fn=None, workers=None):
    """Independent solves for every budget vector in ``eps_grid``.

    Cells that raise are returned with ``result=None`` and the error attached;
    the sweep itself never aborts.  Output order equals input order.
    """
    cfg = cfg or SolverConfig()
    eps_grid = [np.atleast_1d(np.asarray(e, dtype=float)) for e in eps_grid]
    if not eps_grid:
        raise UsageError("eps grid must be nonempty")

    def run(eps):
        seeds = seed_fn(eps) if seed_fn is not None else ()
        try:
            res = solve(prob, budget.with_epsilon(eps), selectors, fam, spec, cfg, seeds)
            return GridCell(eps, res)
        except InvRobError as exc:
            log.warning("cell eps=%s failed: %s", eps.tolist(), exc)
            return GridCell(eps, None, exc)

    workers = workers or cfg.workers
    if workers <= 1:
        return [run(e) for e in eps_grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, eps_grid))


@dataclass(frozen=True)
class ViolationAudit:
    max_violation: float
    entries: tuple
    audit_grid: int


def verify(result, prob, budget, selectors=(IDENTITY, IDENTITY), fam=None, cfg=None, audit_grid=None):
    """Re-check a result on a plain dense grid, independent of the inner maximiser."""
    cfg = cfg or SolverConfig()
    audit_grid = audit_grid or 4 * cfg.inner_grid
    if audit_grid < cfg.inner_grid:
        raise UsageError(f"audit_grid must be >= inner grid ({cfg.inner_grid})")
    x = np.asarray(result.x_star, dtype=float)
    d = np.asarray(result.d_star, dtype=float)
    box = prob.search_box
    rows = constraint_rows(prob, budget, tuple(selectors), x)
    entries = []
    for row in rows:
        sub = row.selector.select(x, fam, d) if row.selector is not None else None
        pts = prob.nominal_scenarios if sub is None else fam.audit_points(sub, audit_grid)
        pts = [u for u in pts if box.contains(u, 1e-12)]
        vals = [row.phi(u) for u in pts]
        k = int(np.argmax(vals))
        entries.append((row.name, "selected", float(vals[k]), np.asarray(pts[k])))
        nv = [row.phi(u) for u in prob.nominal_scenarios]
        k = int(np.argmax(nv))
        entries.append((row.name, "nominal", float(nv[k]), prob.nominal_scenarios[k]))
    cover = max(fam.delta(d, u) for u in prob.nominal_scenarios)
    entries.append(("nominal-in-W", "coverage", float(cover), prob.nominal_scenarios[0]))
    return ViolationAudit(max(e[2] for e in entries), tuple(entries), audit_grid)
