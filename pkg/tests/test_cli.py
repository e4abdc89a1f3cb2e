import json

import pytest

from asdlab.cli import main, parse_eps, parse_ladder, parse_sweep
from asdlab.errors import InvalidInput


def run_json(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = main([*argv, "--out", str(out)])
    return code, json.loads(out.read_text())


def test_sweep_syntax():
    assert parse_sweep("8") == (8.0,)
    assert parse_sweep("4,6,8") == (4.0, 6.0, 8.0)
    assert parse_sweep("4..7") == (4.0, 5.0, 6.0, 7.0)
    assert parse_sweep("4..12:4") == (4.0, 8.0, 12.0)
    with pytest.raises(InvalidInput):
        parse_sweep("4..")


def test_ladder_and_eps_syntax():
    assert parse_ladder("2,3,4") == (2.0, 3.0, 4.0)
    with pytest.raises(InvalidInput):
        parse_ladder("3,4")
    with pytest.raises(InvalidInput):
        parse_ladder("2,4,3")
    assert [str(e) for e in parse_eps("1/4,0.5")] == ["1/4", "1/2"]
    with pytest.raises(InvalidInput):
        parse_eps("-1")


def test_model_form_report(tmp_path):
    code, rep = run_json(tmp_path, "verify-near-symplectic", "--fixture", "model-eps1")
    assert code == 0 and rep["passed"] and rep["schema"] == "asdlab-report/1"
    assert rep["first_failure"] is None


def test_failing_verification_exits_one(tmp_path):
    code, rep = run_json(tmp_path, "verify-near-contact", "--fixture", "closed-potential")
    assert code == 1 and not rep["passed"]
    assert rep["first_failure"] == rep["failures"][0]


def test_invalid_input_exits_two(tmp_path, capsys):
    assert main(["neck-sim", "--ladder", "3,4"]) == 2
    assert "error" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        main(["neck-sim", "--bogus"])
    assert info.value.code == 2


def test_malformed_form_file_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.form"
    bad.write_text("form n=4 k=2 +*\n")
    assert main(["verify-near-symplectic", "--fixture", str(bad)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_neck_csv_and_side_report(tmp_path):
    out = tmp_path / "neck.csv"
    assert main(["neck-sim", "--T", "4..12", "--ladder", "2,3", "--format", "csv", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].split(",")[:2] == ["T", "norm"]
    assert len(lines) == 10
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["passed"] and side["config"]["ladder"] == [2.0, 3.0]


def test_output_is_deterministic_and_independent_of_jobs(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["neck-sim", "--T", "4..8", "--seed", "3", "--out", str(a)])
    main(["neck-sim", "--T", "4..8", "--seed", "3", "--jobs", "2", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[run]\ncommand = neck-sim\nseed = 5\n\n[neck-sim]\nT = 4..8\n")
    code, rep = run_json(tmp_path, "--config", str(cfg))
    assert code == 0 and rep["config"]["seed"] == 5 and rep["config"]["T"] == [4.0, 5.0, 6.0, 7.0, 8.0]
    code, rep = run_json(tmp_path, "--config", str(cfg), "--seed", "7")
    assert rep["config"]["seed"] == 7
    cfg.write_text("[run]\ncolour = blue\n")
    assert main(["neck-sim", "--config", str(cfg)]) == 2


def test_resolution_and_jacobian_commands(tmp_path):
    code, rep = run_json(tmp_path, "resolution-sweep")
    assert code == 0
    code, rep = run_json(tmp_path, "period-jacobian", "--family", "identity", "--caps", "zero")
    assert code == 0
    code, rep = run_json(tmp_path, "period-jacobian", "--family", "redundant")
    assert code == 1


def test_overtwisted_command_single_eps(tmp_path):
    code, rep = run_json(tmp_path, "overtwisted", "--eps", "1/4")
    assert code == 0 and rep["passed"]
    code, rep = run_json(tmp_path, "overtwisted", "--fixture", "direct", "--eps", "1/8")
    assert code == 1
