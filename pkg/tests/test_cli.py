import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from scenopt.cli import main

GOLDEN = Path(__file__).parent / "golden" / "opf_five_bus_500_seed7.json"


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_bound_prints_59(capsys):
    code, out, _ = run(["bound", "--n", "1", "--alpha", "0.05", "--epsilon", "0.95"], capsys)
    assert code == 0
    fields = dict(line.split(None, 1) for line in out.splitlines() if line.strip())
    assert fields["N"].strip() == "59"
    # the bracketing certificate tail(N) <= alpha < tail(N - 1)
    assert float(fields["tail(N)"]) <= 0.05 < float(fields["tail(N-1)"])


def test_bound_trivial(capsys):
    code, out, _ = run(["bound", "--n", "1", "--alpha", "0.5", "--epsilon", "0.5"], capsys)
    assert code == 0 and "N          1" in out


def test_bound_pd_comparison(capsys):
    code, out, _ = run(["bound", "--pd", "5:4", "--pd", "7:42"], capsys)
    assert "0.6k (625)" in out and "3.1e35" in out


@pytest.mark.parametrize("argv", [["bound", "--alpha", "1.5"], ["bound", "--epsilon", "0"],
                                  ["bound", "--pd", "5"], ["nosuch"]])
def test_bad_arguments_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert err


def test_missing_case_exit_3(capsys):
    code, _, err = run(["opf", "--case", "missing.case", "--scenarios", "5"], capsys)
    assert code == 3 and "missing.case" in err


def test_opf_golden(tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = run(["opf", "--case", "five_bus.case", "--scenarios", "500", "--seed", "7",
                      "-o", str(out)], capsys)
    assert code == 0
    assert out.read_bytes() == GOLDEN.read_bytes()
    rep = json.loads(out.read_text())
    assert rep["status"] == "Optimal"
    assert abs(rep["beta_sum"] - 1) <= 1e-8
    assert rep["max_balance_residual"] <= 1e-8
    assert {"support_count", "proposition_holds"} <= set(rep)


def test_validate_opf_report(tmp_path, capsys):
    rep = tmp_path / "v.json"
    code, out, _ = run(["validate", "--report", str(GOLDEN), "--seed", "31", "--repeats", "3"],
                       capsys)
    assert code == 0
    v = json.loads(out)
    assert 0.0 <= v["alpha_hat"] <= 1.0
    assert len(v["alpha_hats"]) == 3 and v["trials"] == 1000


def test_opf_enu_and_config(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scenarios": "60", "seed": 3, "enu": True}))
    code, out, _ = run(["--config", str(cfg), "opf", "--case", "five_bus"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["uncertainty"] == "EnU" and rep["N_used"] == 60 and "mapping" in rep
    assert rep["config"]["seed"] == 3
    cfg.write_text(json.dumps({"colour": "red"}))
    code, _, err = run(["--config", str(cfg), "opf", "--case", "five_bus"], capsys)
    assert code == 2 and "colour" in err


def problem_file(tmp_path):
    # min -x1 - x2 s.t. u1 x1 + u2 x2 <= 1 over u in [1, 2]^2, plus x >= 0
    prob = {"objective": [-1.0, -1.0],
            "template": {"Fx": [[0.0, 0.0]], "f0": [1.0], "Fxu": [[[1.0, 0.0]], [[0.0, 1.0]]],
                         "Fu": [[0.0, 0.0]]},
            "exo": {"box": {"lower": [1.0, 1.0], "upper": [2.0, 2.0]}},
            "fixed": {"A": [[-1.0, 0.0], [0.0, -1.0]], "b": [0.0, 0.0]}}
    path = tmp_path / "p.json"
    path.write_text(json.dumps(prob))
    return path


def test_solve_and_validate(tmp_path, capsys):
    path = problem_file(tmp_path)
    rep = tmp_path / "s.json"
    code, _, _ = run(["solve", "--problem", str(path), "--seed", "2", "-o", str(rep)], capsys)
    assert code == 0
    r = json.loads(rep.read_text())
    assert r["status"] == "Optimal" and r["N_used"] == 93  # min_scenarios(2, 0.05, 0.95)
    assert r["support_count"] <= 2 and r["proposition_holds"]
    code, out, _ = run(["validate", "--report", str(rep), "--seed", "5"], capsys)
    assert code == 0 and 0.0 <= json.loads(out)["alpha_hat"] <= 1.0


def test_solve_rejects_unknown_keys(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"objective": [1.0], "template": {"Fx": [[1.0]], "f0": [1.0]},
                                "extra": 1}))
    code, _, err = run(["solve", "--problem", str(path)], capsys)
    assert code == 2 and "extra" in err


def test_solve_infeasible_exit_1(tmp_path, capsys):
    path = tmp_path / "inf.json"
    path.write_text(json.dumps({"objective": [1.0],
                                "template": {"Fx": [[1.0], [-1.0]], "f0": [-1.0, -1.0]},
                                "support_dim": 1}))
    code, out, _ = run(["solve", "--problem", str(path), "--scenarios", "3"], capsys)
    assert code == 1 and json.loads(out)["status"] == "Infeasible"


def test_bench_pd_cells(capsys):
    code, out, _ = run(["bench", "--no-timing"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert len(rows) == 12
    pd_rows = {(r["uncertainty"], r["system"]): r for r in rows if r["method"] == "PD"}
    assert pd_rows[("ExU", "IEEE5")]["count"] == "0.6k"
    assert pd_rows[("EnU", "IEEE5")]["count"] == "2.4k"
    assert pd_rows[("ExU", "IEEE57")]["count"] == "2.2e29"
    assert pd_rows[("EnU", "IEEE118")]["count"] == "8e76"
    assert all(r["time_s"] == "-" for r in rows)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "scenopt", "--version"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
