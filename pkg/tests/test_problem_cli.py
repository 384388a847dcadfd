import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from unireg.cli import main
from unireg.errors import ParseError, ValidationError
from unireg.problem import ProblemFile, load_problem, parse_problem, save_problem

PROBLEMS = Path(__file__).resolve().parents[1] / "problems"


def doc(**over):
    d = {
        "schema": "unireg.problem/1",
        "dimension": 2,
        "sets": [
            {"kind": "halfspace", "normal": [0, 1], "offset": 0},
            {"kind": "polyhedron", "normals": [[1, 0], [1, 1]], "offsets": [0, 0]},
            {"kind": "union", "pieces": [{"kind": "ball", "center": [0, -1], "radius": 1},
                                         {"kind": "affine", "point": [0, 0], "basis": [[1, 0]]}]},
            {"kind": "hyperplane", "normal": [1, -1], "offset": 0},
        ],
        "reference_point": [0, 0],
        "start_points": [[0.5, 0.25]],
        "solver": {"max_iterations": 100, "stop_displacement": 1e-10, "reference_solution": [0, 0], "seed": 4},
    }
    d.update(over)
    return d


def test_round_trip(tmp_path):
    pf = parse_problem(json.dumps(doc()))
    path = tmp_path / "p.json"
    save_problem(pf, path)
    again = load_problem(path)
    assert again == pf
    assert again.model_dump() == pf.model_dump()
    assert len(again.build_sets()) == 4


def test_unknown_field_rejected():
    with pytest.raises(ValidationError, match="bogus"):
        parse_problem(json.dumps(doc(bogus=1)))


def test_wrong_schema_version():
    with pytest.raises(ValidationError, match="schema"):
        parse_problem(json.dumps(doc(schema="unireg.problem/99")))


def test_dimension_mismatch_named():
    d = doc()
    d["sets"][1]["normals"][1] = [1, 1, 1]
    with pytest.raises(ValidationError, match=r"sets\[1\]\.normals\[1\]"):
        parse_problem(json.dumps(d))


def test_infeasible_reference_names_set():
    d = doc(reference_point=[0, 1])
    with pytest.raises(ValidationError, match=r"sets\[0\] \(halfspace\)"):
        parse_problem(json.dumps(d))


def test_parse_error_has_position():
    with pytest.raises(ParseError, match=r":2:"):
        parse_problem('{"a":\n', "f.json")
    with pytest.raises(ParseError):
        load_problem("/nonexistent/problem.json")


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_cli_constants_case1(capsys):
    code, out = run(capsys, "constants", str(PROBLEMS / "case1.json"))
    rep = json.loads(out)
    assert code == 0
    assert rep["c_hat"] == pytest.approx(0, abs=1e-9)
    assert rep["nu_hat"] == pytest.approx(0.70710678, abs=1e-8)
    assert rep["lifted"]["c_prime"] == pytest.approx(1 / math.sqrt(2), abs=1e-9)
    assert rep["lifted_value_range_violations"] == []


def test_cli_constants_case2(capsys, tmp_path):
    out_path = tmp_path / "r.json"
    code, out = run(capsys, "--output", str(out_path), "constants", str(PROBLEMS / "case2.json"))
    assert code == 0
    assert json.loads(out_path.read_text())["c_hat"] == pytest.approx(-0.70710678, abs=1e-8)


def test_cli_invalid_reference(capsys):
    code = main(["constants", str(PROBLEMS / "infeasible_reference.json")])
    err = capsys.readouterr().err
    assert code == 1 and "sets[1] (ball)" in err


def test_cli_solve_alternating_csv(capsys, tmp_path):
    csv_path = tmp_path / "t.csv"
    code, out = run(capsys, "--output", str(csv_path), "solve", "--method", "alternating",
                    str(PROBLEMS / "two_lines_45.json"))
    rep = json.loads(out)
    assert code == 0
    assert rep["rate"]["per_cycle_rate"] == pytest.approx(0.5, abs=0.02)
    assert rep["theory"]["passed"]
    rows = list(csv.reader(csv_path.open()))
    assert rows[0][:3] == ["k", "displacement", "distance_to_limit"]
    assert len(rows) == rep["iterations"] + 2
    # 17 significant digits round-trip exactly
    pf = load_problem(PROBLEMS / "two_lines_45.json")
    from unireg.solvers import SolverConfig, alternating_projections

    tr = alternating_projections(pf.build_sets(), SolverConfig(pf.start_points[0]))
    for row, x, d in zip(rows[2:], tr.iterates[1:], tr.displacements):
        assert float(row[1]) == d
        assert [float(v) for v in row[3:]] == list(x)


def test_cli_solve_averaged_lift(capsys):
    code, out = run(capsys, "solve", "--method", "averaged-lift", str(PROBLEMS / "three_halfspaces.json"))
    rep = json.loads(out)
    assert code == 0 and rep["deflation_residual"] <= 1e-12 and rep["matches_direct_averaged"]


def test_cli_solve_arity_error(capsys):
    code = main(["solve", "--method", "alternating", str(PROBLEMS / "three_halfspaces.json")])
    assert code == 1 and "exactly 2 sets" in capsys.readouterr().err


def test_cli_solve_nonconvergence(capsys, tmp_path):
    d = json.loads((PROBLEMS / "two_lines_45.json").read_text())
    d["solver"]["max_iterations"] = 3
    p = tmp_path / "short.json"
    p.write_text(json.dumps(d))
    code, out = run(capsys, "solve", "--method", "cyclic", str(p))
    assert code == 3 and json.loads(out)["converged"] is False


def test_cli_solve_start_index(capsys):
    code, out = run(capsys, "solve", "--start-index", "1", str(PROBLEMS / "three_halfspaces.json"))
    assert code == 0 and json.loads(out)["start_index"] == 1
    assert main(["solve", "--start-index", "7", str(PROBLEMS / "three_halfspaces.json")]) == 1


@pytest.mark.parametrize("name,cls", [("case1", "UniformlyRegular"), ("opposite", "ApproximatelyStationary")])
def test_cli_verify(capsys, name, cls):
    code, out = run(capsys, "verify", str(PROBLEMS / f"{name}.json"))
    rep = json.loads(out)
    assert code == 0 and rep["passed"] and rep["classification"] == cls
    names = {c["name"] for c in rep["checks"]}
    assert {"identity:eta2_plus_nu2", "identity:one_plus_c_vs_2nu2", "primal:theta_vs_eta"} <= names
    for c in rep["checks"]:
        if c["name"].startswith("identity:"):
            assert c["residual"] <= 1e-9


def test_cli_verify_failure_exit(capsys):
    # an absurd tolerance makes identity checks fail deterministically
    code = main(["--tolerance", "-1", "verify", str(PROBLEMS / "case1.json")])
    capsys.readouterr()
    assert code == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "unireg", "constants", str(PROBLEMS / "case1.json")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["classification"] == "UniformlyRegular"


def test_options_after_subcommand(capsys, tmp_path):
    out = tmp_path / "r.json"
    assert main(["constants", str(PROBLEMS / "case1.json"), "--output", str(out), "--seed", "4"]) == 0
    assert json.loads(out.read_text())["nu_hat"] == pytest.approx(math.sqrt(2) / 2, abs=1e-9)


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", str(PROBLEMS / "case1.json"), "--method", "newton"])
    assert exc.value.code == 1
