import json

import numpy as np
import pytest

from ocland.cli import run_command


def run(tmp_path, *argv):
    code = run_command(list(argv) + ["--out", str(tmp_path)])
    report = json.loads((tmp_path / "report.json").read_text())
    return code, report


def test_census_report_fields_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    code1, rep1 = run(a, "census", "detparam-counterexample")
    code2, rep2 = run(b, "census", "detparam-counterexample")
    assert code1 == 0 and code2 == 0
    assert rep1["errors"] == []
    assert rep1["problem"] == "detparam-counterexample"
    # deterministic modulo the timestamp
    rep1.pop("generated_at"), rep2.pop("generated_at")
    assert rep1 == rep2
    pts = sorted(tuple(np.round(r["point"], 3)) for r in rep1["results"]["records"]
                 if r["kind"] == "strict-min")
    assert pts == [(1.0, -1.0), (1.0, 1.0)]


def test_unknown_problem_is_a_validation_error(tmp_path):
    code, rep = run(tmp_path, "census", "no-such-problem")
    assert code == 2
    assert rep["errors"][0]["code"] == "validation"


def test_unknown_config_key_is_a_validation_error(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"problem": "example2", "bogus_key": 1}))
    code, rep = run(tmp_path, "census", "--config", str(cfg))
    assert code == 2
    assert rep["errors"][0]["code"] == "validation"


def test_negative_census_budget_is_a_validation_error(tmp_path):
    code, rep = run(tmp_path, "census", "example2", "--starts", "-1")
    assert code == 2


def test_reproduce_example2_checks_pass(tmp_path):
    code, rep = run(tmp_path, "reproduce", "example2")
    assert code == 0
    checks = rep["results"]["checks"]
    assert checks and all(checks.values())


def test_reproduce_failure_exits_3(tmp_path):
    # an absurd quadrature order makes the stochastic census miss its targets
    code, rep = run(tmp_path, "reproduce", "stochastic-counterexample",
                    "--quadrature-order", "1")
    assert code == 3
    assert rep["errors"][0]["code"] == "numerical"


def test_grid_csv_output(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"grid": {"resolution": 21}}))
    code, _ = run(tmp_path, "grid", "example1", "--config", str(cfg),
                  "--format", "csv")
    assert code == 0
    lines = (tmp_path / "grid.csv").read_text().strip().splitlines()
    assert lines[0] == "coord1,coord2,objective"
    assert len(lines) == 1 + 21 * 21
    row = lines[1].split(",")
    assert len(row) == 3
    float(row[2])  # objective parses as a number


def test_warmstart_lqr_defaults_to_lqr_instance(tmp_path):
    code, rep = run(tmp_path, "warmstart-lqr", "--seed", "0")
    assert code == 0
    assert rep["problem"] == "lqr"


def test_solve_dp_on_equivalence_example(tmp_path):
    code, rep = run(tmp_path, "solve-dp", "equivalence-example")
    assert code == 0
    point = np.asarray(rep["results"]["params"], dtype=float).ravel()
    assert np.allclose(point, [0.0, 1.0, 0.5], atol=1e-3)
