"""Command line front end ``invrob``.

Subcommands::

    invrob solve   --spec FILE | --builtin NAME  [--eps E1,E2,...]
    invrob grid    --spec FILE | --builtin NAME  --grid "a:b:s,c:d:s"
    invrob radius  --kind stability|resilience|rrf --spec FILE
    invrob example [--eps E1,E2 | --grid "a:b:s,c:d:s"]
    invrob verify  --spec FILE | --builtin NAME  --result FILE [--audit-grid N]
    invrob spec dump [--builtin NAME]

Exit codes: 0 success, 1 solver nonconvergence, 2 infeasible problem,
3 spec or usage error.  Data goes to standard output or ``--output``;
diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import sys
import tempfile
from dataclasses import replace

import numpy as np

from . import bicriteria
from .errors import InfeasibleProblemError, InvRobError, NonConvergenceError, SpecError, UsageError
from .radii import radius_of_robust_feasibility, resilience_radius, stability_radius
from .solver import SolveResult, solve, solve_grid, verify
from .specfile import dump_builtin, from_dict, load

EXIT_OK, EXIT_NONCONVERGENCE, EXIT_INFEASIBLE, EXIT_SPEC = 0, 1, 2, 3

log = logging.getLogger("invrob")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise SpecError(message)


def _floats(text, what):
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise SpecError(f"{what}: expected comma separated numbers, got {text!r}") from exc
    return np.array(vals)


def parse_grid(text):
    """``"a:b:s,c:d:s"`` to a row-major list of vectors (first component slowest)."""
    axes = []
    for part in text.split(","):
        bits = part.split(":")
        if len(bits) != 3:
            raise SpecError(f"grid axis {part!r} must be start:stop:step")
        try:
            start, stop, step = (float(b) for b in bits)
        except ValueError as exc:
            raise SpecError(f"grid axis {part!r}: {exc}") from exc
        if not step > 0:
            raise SpecError(f"grid step must be > 0 in {part!r}")
        if stop < start:
            raise SpecError(f"grid stop must be >= start in {part!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        axes.append(np.round(start + step * np.arange(count), 12))
    mesh = np.meshgrid(*axes, indexing="ij")
    return [np.array(v) for v in zip(*(a.ravel() for a in mesh))]


def _margin():
    env = os.environ.get("INVROB_MARGIN")
    if env is None:
        return None
    try:
        val = float(env)
    except ValueError as exc:
        raise SpecError(f"INVROB_MARGIN must be a number, got {env!r}") from exc
    if not val > 0 or not np.isfinite(val):
        raise SpecError(f"INVROB_MARGIN must be positive and finite, got {env!r}")
    return val


def _instance(args):
    if getattr(args, "spec", None):
        spec = load(args.spec, _margin())
    else:
        spec = from_dict(dump_builtin(args.builtin or bicriteria.BUILTIN_NAME), _margin())
        # native callables are faster than parsed expressions
        spec.problem = bicriteria.bicriteria_problem(spec.margin)
    for key in ("budget", "family", "measure"):
        if getattr(spec, key) is None:
            raise SpecError(f"spec needs a {key!r} section for this command")
    cfg = spec.solver
    over = {k: v for k, v in (
        ("feasibility_tol", getattr(args, "tol", None)),
        ("inner_grid", getattr(args, "inner_grid", None)),
        ("multistart_grid", getattr(args, "multistart_grid", None)),
        ("exchange_max_rounds", getattr(args, "max_rounds", None)),
    ) if v is not None}
    if over:
        try:
            spec.solver = replace(cfg, **over)
        except InvRobError as exc:
            raise SpecError(str(exc)) from exc
    return spec


def write_atomic(path, text):
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".invrob-", suffix=".tmp")
    except OSError as exc:
        raise SpecError(f"cannot write {path}: {exc.strerror}") from exc
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise SpecError(f"cannot write {path}: {exc.strerror}") from exc


def _emit(args, text, stdout):
    if getattr(args, "output", None):
        write_atomic(args.output, text)
    else:
        stdout.write(text)


def _g(v):
    return "%.17g" % v


def grid_csv(rows):
    """CSV text for ``(eps, result-or-None)`` rows.

    The header uses ``x_star`` for a scalar decision and ``d1_star``,
    ``d2_star``, ... for the design.  Failed cells carry ``nan`` values and
    ``rounds = 0``.
    """
    rows = list(rows)
    if not rows:
        raise UsageError("no results to write")
    p = len(rows[0][0])
    ok = next((r for _, r in rows if r is not None), None)
    n = ok.x_star.size if ok is not None else 1
    ell = ok.d_star.size if ok is not None else 2
    head = [f"eps{i + 1}" for i in range(p)]
    head += ["x_star"] if n == 1 else [f"x{i + 1}_star" for i in range(n)]
    head += [f"d{k + 1}_star" for k in range(ell)]
    head += ["V_star", "rounds", "max_violation"]
    buf = io.StringIO()
    buf.write(",".join(head) + "\n")
    for eps, res in rows:
        vals = [_g(e) for e in eps]
        if res is None:
            vals += ["nan"] * (n + ell + 1) + ["0", "nan"]
        else:
            vals += [_g(v) for v in res.x_star] + [_g(v) for v in res.d_star]
            vals += [_g(res.V_star), str(res.rounds), _g(res.max_violation)]
        buf.write(",".join(vals) + "\n")
    return buf.getvalue()


def emit_grid_csv(results, path):
    """Write grid results as CSV; ``results`` holds ``(eps, SolveResult | None)`` pairs."""
    write_atomic(path, grid_csv(results))


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _result_text(fmt, eps, res):
    if fmt == "csv":
        return grid_csv([(eps, res)])
    out = res.to_json()
    out["eps"] = [float(e) for e in eps]
    return _dumps(out)


def _cmd_solve(args, stdout):
    spec = _instance(args)
    budget = spec.budget
    if args.eps is not None:
        budget = budget.with_epsilon(_floats(args.eps, "--eps"))
    eps = budget.epsilon if budget.mode == "additive" else budget.level
    res = solve(spec.problem, budget, spec.selectors, spec.family, spec.measure, spec.solver)
    _emit(args, _result_text(args.format or "json", eps, res), stdout)
    return EXIT_OK


def _run_grid(spec, eps_grid, workers, seed_fn=None):
    cells = solve_grid(spec.problem, spec.budget, spec.family, spec.measure, spec.solver, eps_grid,
                       spec.selectors, seed_fn, workers)
    for c in cells:
        if not c.ok:
            print(f"cell eps={c.eps.tolist()} failed: {c.error}", file=sys.stderr)
    return cells


def _grid_text(fmt, cells):
    if fmt == "json":
        return _dumps([
            {"eps": c.eps.tolist(), "ok": c.ok,
             "result": c.result.to_json() if c.ok else None,
             "error": None if c.ok else str(c.error)}
            for c in cells
        ])
    return grid_csv([(c.eps, c.result) for c in cells])


def _grid_exit(cells):
    errs = [c.error for c in cells if not c.ok]
    if not errs:
        return EXIT_OK
    if all(isinstance(e, InfeasibleProblemError) for e in errs):
        return EXIT_INFEASIBLE
    return EXIT_NONCONVERGENCE


def _workers(args):
    return args.workers or os.cpu_count() or 1


def _cmd_grid(args, stdout):
    spec = _instance(args)
    if spec.budget.mode != "additive":
        raise SpecError("grid sweeps need an additive budget")
    eps_grid = parse_grid(args.grid)
    if len(eps_grid[0]) != spec.budget.p:
        raise SpecError(f"grid has {len(eps_grid[0])} axes, budget has {spec.budget.p} components")
    cells = _run_grid(spec, eps_grid, _workers(args))
    _emit(args, _grid_text(args.format or "csv", cells), stdout)
    return _grid_exit(cells)


def _cmd_example(args, stdout):
    args.builtin, args.spec = bicriteria.BUILTIN_NAME, None
    spec = _instance(args)
    if args.grid is not None and args.eps is not None:
        raise SpecError("use either --eps or --grid")
    if args.grid is None:
        eps = _floats(args.eps or "0,0", "--eps")
        if eps.size != 2:
            raise SpecError("--eps needs two components")
        res = bicriteria.solve_example(eps, spec.solver)
        _emit(args, _result_text(args.format or "csv", eps, res), stdout)
        return EXIT_OK
    eps_grid = parse_grid(args.grid)
    if len(eps_grid[0]) != 2:
        raise SpecError("the example needs a two-axis grid")
    cells = _run_grid(spec, eps_grid, _workers(args), lambda e: [bicriteria.seed_point(e)])
    _emit(args, _grid_text(args.format or "csv", cells), stdout)
    return _grid_exit(cells)


def _cmd_radius(args, stdout):
    spec = load(args.spec, _margin())
    rad = spec.radius
    if rad is None:
        raise SpecError("spec has no 'radius' section")
    if rad["kind"] != args.kind:
        raise SpecError(f"spec describes a {rad['kind']} radius, --kind asks for {args.kind}")
    cfg = spec.solver
    if args.kind == "rrf":
        res = radius_of_robust_feasibility(rad["A"], rad["b"], rad["Z"], rad["decision_box"], cfg, spec.margin)
    elif args.kind == "resilience":
        res = resilience_radius(spec.problem, rad["level"], cfg)
    else:
        res = stability_radius(spec.problem, rad["x_bar"], rad["eps"], rad["constraint_fns"], cfg,
                               rad.get("objective", 0))
    _emit(args, _dumps(res.to_json()), stdout)
    return EXIT_OK


def _load_result(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return raw, SolveResult(
            x_star=np.array(raw["x_star"], dtype=float),
            d_star=np.array(raw["d_star"], dtype=float),
            V_star=float(raw["V_star"]),
            active_set=[], rounds=int(raw.get("rounds", 0)), trace=[],
            max_violation=float(raw.get("max_violation", np.nan)),
        )
    except OSError as exc:
        raise SpecError(f"cannot read result {path}: {exc.strerror}") from exc
    except (ValueError, KeyError, TypeError) as exc:
        raise SpecError(f"{path}: not a solve result ({exc})") from exc


def _cmd_verify(args, stdout):
    spec = _instance(args)
    raw, res = _load_result(args.result)
    budget = spec.budget
    if "eps" in raw and budget.mode == "additive":
        budget = budget.with_epsilon(raw["eps"])
    audit = verify(res, spec.problem, budget, spec.selectors, spec.family, spec.solver, args.audit_grid)
    out = {
        "max_violation": audit.max_violation,
        "audit_grid": audit.audit_grid,
        "feasible": audit.max_violation <= 2 * spec.solver.feasibility_tol,
        "entries": [
            {"name": n, "class": c, "value": v, "witness": np.asarray(w).tolist()}
            for n, c, v, w in audit.entries
        ],
    }
    _emit(args, _dumps(out), stdout)
    return EXIT_OK


def _cmd_spec(args, stdout):
    if args.action != "dump":
        raise SpecError(f"unknown spec action {args.action!r}")
    _emit(args, _dumps(dump_builtin(args.builtin or bicriteria.BUILTIN_NAME)), stdout)
    return EXIT_OK


def build_parser():
    p = _Parser(prog="invrob", description="Inverse robust optimisation via semi-infinite programming.")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, source=True, solver=True):
        if source:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--spec", help="problem spec JSON file")
            g.add_argument("--builtin", help=f"built-in instance name (default {bicriteria.BUILTIN_NAME})")
        if solver:
            sp.add_argument("--tol", type=float, help="feasibility tolerance")
            sp.add_argument("--inner-grid", type=int, help="inner maximisation grid size")
            sp.add_argument("--multistart-grid", type=int, help="start points per axis")
            sp.add_argument("--max-rounds", type=int, help="exchange round limit")
        sp.add_argument("-o", "--output", help="write here instead of standard output")

    sp = sub.add_parser("solve", help="solve one instance")
    common(sp)
    sp.add_argument("--eps", help="budget vector, comma separated")
    sp.add_argument("--format", choices=("json", "csv"))

    sp = sub.add_parser("grid", help="sweep a budget grid")
    common(sp)
    sp.add_argument("--grid", required=True, help='axes "start:stop:step,..." (first axis slowest)')
    sp.add_argument("--format", choices=("csv", "json"))
    sp.add_argument("--workers", type=int, help="parallel cells (default: CPU count)")

    sp = sub.add_parser("radius", help="stability, resilience or robust feasibility radius")
    sp.add_argument("--kind", required=True, choices=("stability", "resilience", "rrf"))
    sp.add_argument("--spec", required=True, help="spec JSON file with a 'radius' section")
    sp.add_argument("-o", "--output")

    sp = sub.add_parser("example", help=f"the built-in {bicriteria.BUILTIN_NAME} instance")
    common(sp, source=False)
    sp.add_argument("--eps", help="budget pair e1,e2 (default 0,0)")
    sp.add_argument("--grid", help='budget grid "a:b:s,c:d:s"')
    sp.add_argument("--format", choices=("csv", "json"))
    sp.add_argument("--workers", type=int, help="parallel cells (default: CPU count)")

    sp = sub.add_parser("verify", help="audit a solve result on a finer grid")
    common(sp)
    sp.add_argument("--result", required=True, help="JSON written by 'solve'")
    sp.add_argument("--audit-grid", type=int, help="audit grid size (default 4x inner grid)")

    sp = sub.add_parser("spec", help="spec file utilities")
    sp.add_argument("action", choices=("dump",))
    sp.add_argument("--builtin", help=f"instance name (default {bicriteria.BUILTIN_NAME})")
    sp.add_argument("-o", "--output")
    return p


_HANDLERS = {
    "solve": _cmd_solve,
    "grid": _cmd_grid,
    "radius": _cmd_radius,
    "example": _cmd_example,
    "verify": _cmd_verify,
    "spec": _cmd_spec,
}


def run(argv=None, stdout=None):
    """Run the CLI and return the exit code (never raises for expected errors)."""
    stdout = stdout or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                            format="%(levelname)s %(name)s: %(message)s")
        return _HANDLERS[args.command](args, stdout)
    except NonConvergenceError as exc:
        print(f"invrob: no convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except InfeasibleProblemError as exc:
        print(f"invrob: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (SpecError, UsageError) as exc:
        print(f"invrob: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except InvRobError as exc:
        print(f"invrob: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SPEC


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
