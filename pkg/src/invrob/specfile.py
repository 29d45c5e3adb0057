"""JSON problem specifications.

A spec file holds one uncertain problem (functions as expression strings),
its budget, design family, measure, selectors and optional solver or radius
settings.  ``null`` stands for an infinite box bound.  The ``rrf`` section
describes a robust linear system and needs no functions at all.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

import jsonschema
import numpy as np

from .bicriteria import BUILTIN_NAME, builtin_instance
from .box import Box
from .design import FLAGS, family_params, make_family
from .errors import InvRobError, SpecError
from .expr import parse
from .measures import MEASURE_KINDS, MeasureSpec
from .model import IDENTITY, NOMINAL_ONLY, BudgetSpec, UncertainProblem
from .solver import SolverConfig

SCHEMA_VERSION = 1

_bound = {"type": ["number", "null"]}
_vec = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_box = {
    "type": "object",
    "required": ["lo", "hi"],
    "properties": {"lo": {"type": "array", "items": _bound}, "hi": {"type": "array", "items": _bound}},
    "additionalProperties": False,
}
_fn = {
    "type": "object",
    "required": ["expr"],
    "properties": {"expr": {"type": "string"}, "flag": {"enum": list(FLAGS)}},
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["schema"],
    "properties": {
        "schema": {"const": SCHEMA_VERSION},
        "name": {"type": "string"},
        "margin": {"type": "number", "exclusiveMinimum": 0},
        "decision": _box,
        "uncertainty": _box,
        "nominal": {"type": "array", "items": _vec, "minItems": 1},
        "objectives": {"type": "array", "items": _fn, "minItems": 1},
        "constraints": {"type": "array", "items": _fn},
        "budget": {
            "type": "object",
            "required": ["mode"],
            "properties": {
                "mode": {"enum": ["additive", "fixed-level"]},
                "nominal_value": _vec,
                "epsilon": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "level": _vec,
            },
            "additionalProperties": False,
        },
        "design": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["interval1d", "box", "ball", "scaled-set"]},
                "m": {"type": "integer", "minimum": 1},
                "center": _vec,
                "anchor": _vec,
                "vertices": {"type": "array", "items": _vec, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "measure": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": list(MEASURE_KINDS)}, "params": {"type": "object"}},
            "additionalProperties": False,
        },
        "selectors": {
            "type": "array",
            "items": {"enum": ["identity", "nominal-only"]},
            "minItems": 2,
            "maxItems": 2,
        },
        "solver": {"type": "object"},
        "radius": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["stability", "resilience", "rrf"]},
                "x_bar": _vec,
                "eps": {"type": "number", "minimum": 0},
                "objective": {"type": "integer", "minimum": 0},
                "x_constraints": {"type": "array", "items": {"type": "string"}},
                "level": {"type": ["number", "array"]},
                "A": {"type": "array", "items": _vec, "minItems": 1},
                "b": _vec,
                "Z": {"type": "array", "items": _vec, "minItems": 1},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


@dataclass
class ProblemSpec:
    """Parsed spec file; fields are ``None`` when the section is absent."""

    name: str
    problem: UncertainProblem | None = None
    budget: BudgetSpec | None = None
    selectors: tuple = (IDENTITY, IDENTITY)
    family: object = None
    measure: MeasureSpec | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    radius: dict | None = None
    margin: float = 12.0
    raw: dict = field(default_factory=dict, repr=False)


def _box_from(obj, what):
    lo = [-np.inf if v is None else v for v in obj["lo"]]
    hi = [np.inf if v is None else v for v in obj["hi"]]
    if len(lo) != len(hi) or not lo:
        raise SpecError(f"{what} box needs matching nonempty lo and hi")
    try:
        return Box(lo, hi)
    except InvRobError as exc:
        raise SpecError(f"{what} box: {exc}") from exc


def _solver_config(obj):
    names = {f.name for f in fields(SolverConfig)}
    unknown = set(obj) - names
    if unknown:
        raise SpecError(f"unknown solver settings: {sorted(unknown)}")
    try:
        return SolverConfig(**obj)
    except (InvRobError, TypeError) as exc:
        raise SpecError(f"solver settings: {exc}") from exc


def from_dict(raw, margin=None):
    """Build a :class:`ProblemSpec` from parsed JSON.

    ``margin`` overrides the file's margin (used for the ``INVROB_MARGIN``
    environment variable).
    """
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "top level"
        raise SpecError(f"spec invalid at {where}: {exc.message}") from exc
    margin = float(margin if margin is not None else raw.get("margin", 12.0))
    out = ProblemSpec(name=raw.get("name", "problem"), margin=margin, raw=raw)
    out.solver = _solver_config(raw.get("solver", {}))
    radius = raw.get("radius")
    out.radius = dict(radius) if radius else None
    if radius and radius["kind"] == "rrf":
        for key in ("A", "b", "Z"):
            if key not in radius:
                raise SpecError(f"rrf section needs {key!r}")
        if "decision" not in raw:
            raise SpecError("rrf spec needs a decision box")
        out.radius["decision_box"] = _box_from(raw["decision"], "decision")
        return out
    for key in ("decision", "uncertainty", "nominal", "objectives"):
        if key not in raw:
            raise SpecError(f"spec needs a {key!r} section")
    try:
        out.problem = _problem(raw, margin)
        n, m, p = out.problem.n, out.problem.m, out.problem.p
        if "budget" in raw:
            out.budget = _budget(raw["budget"], p)
        if "design" in raw:
            d = dict(raw["design"])
            out.family = make_family(d.pop("kind"), **d)
            if out.family.m != m:
                raise SpecError(f"design family has dimension {out.family.m}, uncertainty has {m}")
        if "measure" in raw:
            params = raw["measure"].get("params", {})
            out.measure = _measure(raw["measure"]["kind"], params)
        sel = raw.get("selectors", ["identity", "identity"])
        out.selectors = tuple(IDENTITY if s == "identity" else NOMINAL_ONLY for s in sel)
        if radius and radius["kind"] == "stability":
            cons = [parse(c, n, 0) for c in radius.get("x_constraints", [])]
            out.radius["constraint_fns"] = [lambda x, c=c: c(x, ()) for c in cons]
            if "x_bar" not in radius or "eps" not in radius:
                raise SpecError("stability section needs 'x_bar' and 'eps'")
        if radius and radius["kind"] == "resilience" and "level" not in radius:
            raise SpecError("resilience section needs 'level'")
    except SpecError:
        raise
    except InvRobError as exc:
        raise SpecError(str(exc)) from exc
    return out


def _problem(raw, margin):
    dbox = _box_from(raw["decision"], "decision")
    ubox = _box_from(raw["uncertainty"], "uncertainty")
    n, m = dbox.dim, ubox.dim
    objs = [parse(o["expr"], n, m) for o in raw["objectives"]]
    cons = [parse(c["expr"], n, m) for c in raw.get("constraints", [])]
    sources = {
        "objectives": [o["expr"] for o in raw["objectives"]],
        "constraints": [c["expr"] for c in raw.get("constraints", [])],
    }
    return UncertainProblem(
        objectives=objs,
        constraints=cons,
        uncertainty_box=ubox,
        nominal_scenarios=raw["nominal"],
        decision_box=dbox,
        objective_flags=[o.get("flag", "general") for o in raw["objectives"]],
        constraint_flags=[c.get("flag", "general") for c in raw.get("constraints", [])],
        margin=margin,
        name=raw.get("name", "problem"),
        sources=sources,
    )


def _budget(obj, p):
    if obj["mode"] == "additive":
        if "nominal_value" not in obj:
            raise SpecError("additive budget needs 'nominal_value'")
        eps = obj.get("epsilon", [0.0] * p)
        b = BudgetSpec.additive(obj["nominal_value"], eps)
    else:
        if "level" not in obj:
            raise SpecError("fixed-level budget needs 'level'")
        b = BudgetSpec.fixed_level(obj["level"])
    if b.p != p:
        raise SpecError(f"budget has {b.p} components, problem has {p} objectives")
    return b


def _measure(kind, params):
    if kind == "gaussian-probability":
        return MeasureSpec.gaussian(params.get("mean"), params.get("sigma"))
    if kind in ("min-dist-to-bad", "max-dist-to-bad"):
        if "box" in params:
            return MeasureSpec(kind, bad_box=_box_from(params["box"], "bad"))
        return MeasureSpec(kind, bad_points=params.get("points"))
    return MeasureSpec(kind)


def load(path, margin=None):
    """Read and validate a spec file."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read spec {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return from_dict(raw, margin)


def _bounds_json(box):
    return box.to_json()


def to_dict(prob, budget=None, fam=None, spec=None, selectors=None):
    """Serialise a problem whose functions carry expression sources."""
    if not prob.sources:
        raise SpecError(f"problem {prob.name!r} has no expression sources to dump")
    out = {
        "schema": SCHEMA_VERSION,
        "name": prob.name,
        "margin": prob.margin,
        "decision": _bounds_json(prob.decision_box),
        "uncertainty": _bounds_json(prob.uncertainty_box),
        "nominal": prob.nominal_scenarios.tolist(),
        "objectives": [
            {"expr": e, "flag": f} for e, f in zip(prob.sources["objectives"], prob.objective_flags)
        ],
        "constraints": [
            {"expr": e, "flag": f} for e, f in zip(prob.sources["constraints"], prob.constraint_flags)
        ],
    }
    if budget is not None:
        if budget.mode == "additive":
            if callable(budget.epsilon):
                raise SpecError("budget functions cannot be serialised")
            out["budget"] = {
                "mode": "additive",
                "nominal_value": np.asarray(budget.nominal_value).tolist(),
                "epsilon": np.asarray(budget.epsilon).tolist(),
            }
        else:
            out["budget"] = {"mode": "fixed-level", "level": np.asarray(budget.level).tolist()}
    if fam is not None:
        out["design"] = {"kind": fam.kind, **family_params(fam)}
    if spec is not None:
        out["measure"] = spec.to_json()
    if selectors is not None:
        if any(s.kind == "custom" for s in selectors):
            raise SpecError("custom selectors cannot be serialised")
        out["selectors"] = [s.kind for s in selectors]
    return out


def dump_builtin(name=BUILTIN_NAME, eps=(0.0, 0.0)):
    """Spec dictionary of a built-in instance."""
    inst = builtin_instance(name, eps)
    return to_dict(inst["problem"], inst["budget"], inst["family"], inst["measure"], inst["selectors"])

