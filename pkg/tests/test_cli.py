import csv
import io
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from invrob.cli import (
    EXIT_INFEASIBLE,
    EXIT_NONCONVERGENCE,
    EXIT_OK,
    EXIT_SPEC,
    emit_grid_csv,
    parse_grid,
    run,
)
from invrob.errors import SpecError

TOYS = Path(__file__).resolve().parent.parent / "toys"
HEADER = "eps1,eps2,x_star,d1_star,d2_star,V_star,rounds,max_violation"


def call(*argv):
    out = io.StringIO()
    code = run(list(argv), out)
    return code, out.getvalue()


def test_example_zero_budget_row():
    code, text = call("example", "--eps", "0,0")
    assert code == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 1 and float(rows[0]["V_star"]) == 0.0
    assert float(rows[0]["x_star"]) == pytest.approx(2.0, abs=1e-6)


def test_one_cell_grid_is_two_lines(tmp_path):
    out = tmp_path / "g.csv"
    code, _ = call("example", "--grid", "1:1:0.5,2:2:0.5", "-o", str(out))
    lines = out.read_text().split("\n")
    assert code == EXIT_OK and lines[0] == HEADER and len(lines) == 3 and lines[2] == ""


def test_grid_csv_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert call("example", "--grid", "0:1:0.5,0:1:0.5", "--workers", "1", "-o", str(a))[0] == EXIT_OK
    assert call("example", "--grid", "0:1:0.5,0:1:0.5", "--workers", "4", "-o", str(b))[0] == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.reader(io.StringIO(a.read_text())))[1:]
    assert [(float(r[0]), float(r[1])) for r in rows] == [(i, j) for i in (0, 0.5, 1) for j in (0, 0.5, 1)]


def test_parse_grid_row_major_and_errors():
    assert [tuple(e) for e in parse_grid("0:1:0.5,2:3:1")] == [(0.0, 2.0), (0.0, 3.0), (0.5, 2.0), (0.5, 3.0), (1.0, 2.0), (1.0, 3.0)]
    for bad in ("0:1", "1:0:0.5", "0:1:0", "a:b:c"):
        with pytest.raises(SpecError):
            parse_grid(bad)


def test_emit_csv_writes_nan_for_failed_cells(tmp_path):
    p = tmp_path / "x.csv"
    emit_grid_csv([(np.array([0.0, 1.0]), None)], p)
    row = p.read_text().splitlines()[1].split(",")
    assert row[:2] == ["0", "1"] and row[2] == "nan" and row[6] == "0"


def test_rrf_radius_json_shape(tmp_path):
    spec = tmp_path / "toy_lp.json"
    shutil.copy(TOYS / "toy_lp.json", spec)
    code, text = call("radius", "--kind", "rrf", "--spec", str(spec))
    out = json.loads(text)
    assert code == EXIT_OK
    assert {"kind", "radius", "witness", "x", "truncated"} <= set(out)
    assert out["radius"] == pytest.approx(1.0, abs=1e-6) and len(out["witness"]) == 2


def test_radius_kind_mismatch_is_spec_error():
    assert call("radius", "--kind", "stability", "--spec", str(TOYS / "toy_lp.json"))[0] == EXIT_SPEC


def test_margin_environment_variable(tmp_path, monkeypatch):
    spec = json.loads((TOYS / "resilience_quadratic.json").read_text())
    spec["radius"]["level"] = 1e12
    path = tmp_path / "wide.json"
    path.write_text(json.dumps(spec))
    monkeypatch.setenv("INVROB_MARGIN", "5")
    code, text = call("radius", "--kind", "resilience", "--spec", str(path))
    out = json.loads(text)
    assert code == EXIT_OK and out["truncated"] and out["radius"] == pytest.approx(5.0)


def test_exit_code_nonconvergence():
    assert call("example", "--eps", "0,5", "--max-rounds", "1")[0] == EXIT_NONCONVERGENCE


def test_exit_code_infeasible(tmp_path):
    raw = json.loads((TOYS / "toy_lp.json").read_text())
    raw["radius"].update(A=[[1], [-1]], b=[-1, -1])
    path = tmp_path / "infeasible.json"
    path.write_text(json.dumps(raw))
    assert call("radius", "--kind", "rrf", "--spec", str(path))[0] == EXIT_INFEASIBLE


@pytest.mark.parametrize("argv", [
    ["example", "--eps", "1"],
    ["example", "--eps", "0,x"],
    ["example", "--eps", "0,0", "--grid", "0:1:1,0:1:1"],
    ["solve", "--spec", "/nonexistent.json"],
    ["radius", "--kind", "volume", "--spec", "x.json"],
    ["frobnicate"],
    [],
])
def test_exit_code_usage_errors(argv):
    assert call(*argv)[0] == EXIT_SPEC


def test_solve_then_verify(tmp_path):
    res = tmp_path / "r.json"
    assert call("solve", "--builtin", "bicriteria-normal", "--eps", "0.5,2", "-o", str(res))[0] == EXIT_OK
    code, text = call("verify", "--builtin", "bicriteria-normal", "--result", str(res))
    out = json.loads(text)
    assert code == EXIT_OK and out["feasible"] and out["audit_grid"] == 256


def test_spec_dump_then_solve_from_file(tmp_path):
    code, text = call("spec", "dump")
    path = tmp_path / "ex.json"
    path.write_text(text)
    code2, solved = call("solve", "--spec", str(path), "--eps", "0,0")
    assert code == code2 == EXIT_OK
    assert json.loads(solved)["V_star"] == 0.0


def test_output_written_atomically(tmp_path):
    out = tmp_path / "o.csv"
    out.write_text("old")
    code, _ = call("example", "--eps", "1,x", "-o", str(out))
    assert code == EXIT_SPEC and out.read_text() == "old"
    assert call("example", "--eps", "0,0", "-o", str(out))[0] == EXIT_OK
    assert out.read_text().startswith(HEADER)
    assert [p.name for p in tmp_path.iterdir()] == ["o.csv"]
